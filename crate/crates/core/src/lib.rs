//! Geometry and detection machinery for rotated (oriented) bounding boxes:
//! skew IoU, rotation anchors, delta coding, anchor assignment, losses,
//! rotated NMS, a dense feature pyramid reference pass, multi-shape ROI
//! Align, detection evaluation and large-scene tiling.

pub mod anchors;
pub mod coder;
pub mod dfpn;
pub mod error;
pub mod evaluator;
pub mod geom;
pub mod loss;
pub mod matcher;
pub mod nms;
pub mod perf;
pub mod roi_align;
pub mod tensor;
pub mod tiler;

pub use anchors::{Anchor, AnchorConfig, Level, LevelSpec};
pub use coder::{decode, encode, BoxCoder, DeltaVector};
pub use dfpn::{dfpn_forward, DfpnWeights, Pyramid};
pub use error::{Error, Result};
pub use evaluator::{
    evaluate, pr_curve, Criterion, Detection, EvalConfig, EvalImage, EvalResult, ImageId,
};
pub use geom::{
    canonicalize, corners, hrect, hrect_iou, intersect_convex, skew_iou, ConvexPolygon, HRect,
    Point, RawBox, RotatedBox,
};
pub use loss::{multitask_loss, LossBreakdown, LossConfig, LossEntry};
pub use matcher::{assign, sample, AssignerConfig, Assignment, Label, MiniBatch};
pub use nms::{hrect_nms, rotated_nms, topk, NmsMode, ScoredBox};
pub use roi_align::{multiscale_pool, roi_align, PooledFeature};
pub use tensor::Tensor;
pub use tiler::{merge_scene, plan_tiles, PreprocessConfig, TileSpec};

/// Version tag carried by every structured output.
pub const SCHEMA: &str = "rotbox/1";
