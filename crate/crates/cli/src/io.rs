//! File plumbing shared by the subcommands. `-` means stdin or stdout.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use rotbox::{Label, SCHEMA};

use crate::error::{CliError, Result};

/// Scene coordinate convention, repeated in every tiling output.
pub const COORDINATES: &str = "x = column, y = row, origin top-left";

fn file_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::File {
        path: path.display().to_string(),
        source,
    }
}

fn is_std(path: &Path) -> bool {
    path.as_os_str() == "-"
}

pub fn open_input(path: &Path) -> Result<Box<dyn BufRead>> {
    if is_std(path) {
        return Ok(Box::new(BufReader::new(io::stdin())));
    }
    let f = File::open(path).map_err(file_err(path))?;
    Ok(Box::new(BufReader::new(f)))
}

pub fn read_text(path: &Path) -> Result<String> {
    let mut s = String::new();
    open_input(path)?
        .read_to_string(&mut s)
        .map_err(file_err(path))?;
    Ok(s)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&read_text(path)?)?)
}

/// A literal JSON value if it looks like one, otherwise a path to a file holding one.
pub fn inline_or_file<T: DeserializeOwned>(arg: &str) -> Result<T> {
    let t = arg.trim_start();
    if t.starts_with('{') || t.starts_with('[') {
        Ok(serde_json::from_str(t)?)
    } else {
        read_json(Path::new(arg))
    }
}

pub fn create_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    match path {
        None => Ok(Box::new(BufWriter::new(io::stdout()))),
        Some(p) if is_std(p) => Ok(Box::new(BufWriter::new(io::stdout()))),
        Some(p) => {
            let f = File::create(p).map_err(file_err(p))?;
            log::info!("writing {}", p.display());
            Ok(Box::new(BufWriter::new(f)))
        }
    }
}

pub fn finish(mut out: Box<dyn Write>, path: Option<&Path>) -> Result<()> {
    out.flush().map_err(|source| CliError::File {
        path: path.map_or("<stdout>".into(), |p| p.display().to_string()),
        source,
    })
}

#[derive(Serialize)]
pub struct Envelope<'a, T> {
    pub schema: &'static str,
    #[serde(flatten)]
    pub body: &'a T,
}

pub fn envelope<T>(body: &T) -> Envelope<'_, T> {
    Envelope {
        schema: SCHEMA,
        body,
    }
}

/// One JSON document with the schema tag, followed by a newline.
pub fn write_json<T: Serialize>(path: Option<&Path>, body: &T) -> Result<()> {
    let mut out = create_output(path)?;
    serde_json::to_writer(&mut out, &envelope(body))?;
    writeln!(out).map_err(|source| CliError::File {
        path: "<output>".into(),
        source,
    })?;
    finish(out, path)
}

pub fn csv_reader(path: &Path) -> Result<csv::Reader<Box<dyn BufRead>>> {
    Ok(csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(open_input(path)?))
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    csv_reader(path)?
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(Into::into)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnchorRow {
    pub level: String,
    pub row: usize,
    pub col: usize,
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelRow {
    pub index: usize,
    pub label: Label,
    pub matched_gt: Option<usize>,
    pub iou: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowRow {
    pub index: usize,
    pub xmin: f64,
    pub ymin: f64,
    pub xmax: f64,
    pub ymax: f64,
}

pub fn tile_file(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("tile_{index}.json"))
}
