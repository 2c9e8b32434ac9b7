//! File I/O: a strict NRRD subset, cohort manifests and feature tables.

use std::collections::HashSet;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volgrid::{Grid, LabelMask, ProbabilityMap, Volume3D, VoxelGeometry};

// ---------------------------------------------------------------------------
// NRRD
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NrrdEncoding {
    Raw,
    Gzip,
}

impl std::str::FromStr for NrrdEncoding {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(Self::Raw),
            "gzip" | "gz" => Ok(Self::Gzip),
            other => Err(Error::UnsupportedNrrd {
                field: "encoding".into(),
                value: other.into(),
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NrrdType {
    U8,
    I16,
    F32,
}

impl NrrdType {
    fn parse(s: &str) -> Result<Self> {
        match s {
            "uint8" | "uchar" | "unsigned char" | "uint8_t" => Ok(Self::U8),
            "short" | "int16" | "int16_t" | "short int" | "signed short" | "signed short int" => Ok(Self::I16),
            "float" => Ok(Self::F32),
            other => Err(Error::UnsupportedNrrd {
                field: "type".into(),
                value: other.into(),
            }),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Self::U8 => "uint8",
            Self::I16 => "short",
            Self::F32 => "float",
        }
    }

    fn width(self) -> usize {
        match self {
            Self::U8 => 1,
            Self::I16 => 2,
            Self::F32 => 4,
        }
    }
}

/// Decoded payload, keeping the on-disk sample type.
#[derive(Clone, Debug, PartialEq)]
pub enum NrrdData {
    U8(Vec<u8>),
    I16(Vec<i16>),
    F32(Vec<f32>),
}

impl NrrdData {
    pub fn len(&self) -> usize {
        match self {
            Self::U8(v) => v.len(),
            Self::I16(v) => v.len(),
            Self::F32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample_type(&self) -> NrrdType {
        match self {
            Self::U8(_) => NrrdType::U8,
            Self::I16(_) => NrrdType::I16,
            Self::F32(_) => NrrdType::F32,
        }
    }

    pub fn to_f32(&self) -> Vec<f32> {
        match self {
            Self::U8(v) => v.iter().map(|&x| f32::from(x)).collect(),
            Self::I16(v) => v.iter().map(|&x| f32::from(x)).collect(),
            Self::F32(v) => v.clone(),
        }
    }

    fn as_view(&self) -> NrrdSlice<'_> {
        match self {
            Self::U8(v) => NrrdSlice::U8(v),
            Self::I16(v) => NrrdSlice::I16(v),
            Self::F32(v) => NrrdSlice::F32(v),
        }
    }
}

/// Borrowed payload used by the writer.
#[derive(Clone, Copy, Debug)]
pub enum NrrdSlice<'a> {
    U8(&'a [u8]),
    I16(&'a [i16]),
    F32(&'a [f32]),
}

impl NrrdSlice<'_> {
    fn sample_type(&self) -> NrrdType {
        match self {
            Self::U8(_) => NrrdType::U8,
            Self::I16(_) => NrrdType::I16,
            Self::F32(_) => NrrdType::F32,
        }
    }

    fn to_le_bytes(self) -> Vec<u8> {
        match self {
            Self::U8(v) => v.to_vec(),
            Self::I16(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
            Self::F32(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
        }
    }
}

/// A parsed NRRD volume.
#[derive(Clone, Debug, PartialEq)]
pub struct NrrdImage {
    pub dims: [usize; 3],
    pub geometry: VoxelGeometry,
    pub data: NrrdData,
}

impl NrrdImage {
    pub fn into_volume(self) -> Result<Volume3D> {
        Volume3D::new(self.dims, self.geometry, self.data.to_f32())
    }

    pub fn into_mask(self) -> Result<LabelMask> {
        let labels = match self.data {
            NrrdData::U8(v) => v,
            NrrdData::I16(v) => v
                .into_iter()
                .map(|x| u8::try_from(x).unwrap_or(u8::MAX))
                .collect(),
            NrrdData::F32(v) => v
                .into_iter()
                .map(|x| match x {
                    0.0 => 0,
                    1.0 => 1,
                    _ => u8::MAX,
                })
                .collect(),
        };
        LabelMask::new(self.dims, self.geometry, labels)
    }

    pub fn into_probability(self) -> Result<ProbabilityMap> {
        ProbabilityMap::new(self.dims, self.geometry, self.data.to_f32())
    }
}

/// How a caller expects a file's content to be interpreted.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ContentKind {
    Intensity,
    Binary,
    Probability,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LoadedGrid {
    Intensity(Volume3D),
    Binary(LabelMask),
    Probability(ProbabilityMap),
}

/// Grids that can be written as NRRD without copying their samples.
pub trait NrrdSource {
    fn nrrd_dims(&self) -> [usize; 3];
    fn nrrd_geometry(&self) -> &VoxelGeometry;
    fn nrrd_samples(&self) -> NrrdSlice<'_>;
}

impl NrrdSource for NrrdImage {
    fn nrrd_dims(&self) -> [usize; 3] {
        self.dims
    }
    fn nrrd_geometry(&self) -> &VoxelGeometry {
        &self.geometry
    }
    fn nrrd_samples(&self) -> NrrdSlice<'_> {
        self.data.as_view()
    }
}

macro_rules! grid_source {
    ($t:ty, $variant:ident, $accessor:ident) => {
        impl NrrdSource for $t {
            fn nrrd_dims(&self) -> [usize; 3] {
                self.dims()
            }
            fn nrrd_geometry(&self) -> &VoxelGeometry {
                self.geometry()
            }
            fn nrrd_samples(&self) -> NrrdSlice<'_> {
                NrrdSlice::$variant(self.$accessor())
            }
        }
    };
}

grid_source!(Volume3D, F32, values);
grid_source!(LabelMask, U8, labels);
grid_source!(ProbabilityMap, F32, probs);

impl NrrdSource for Grid<i16> {
    fn nrrd_dims(&self) -> [usize; 3] {
        self.dims()
    }
    fn nrrd_geometry(&self) -> &VoxelGeometry {
        self.geometry()
    }
    fn nrrd_samples(&self) -> NrrdSlice<'_> {
        NrrdSlice::I16(self.data())
    }
}

fn unsupported(field: &str, value: &str) -> Error {
    Error::UnsupportedNrrd {
        field: field.into(),
        value: value.into(),
    }
}

fn parse_vector(s: &str) -> Result<[f64; 3]> {
    let inner = s
        .trim()
        .strip_prefix('(')
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(|| Error::MalformedNrrd(format!("expected (x,y,z), got {s:?}")))?;
    let parts: Vec<f64> = inner
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::MalformedNrrd(format!("bad vector {s:?}: {e}")))?;
    <[f64; 3]>::try_from(parts).map_err(|_| Error::MalformedNrrd(format!("vector {s:?} is not 3D")))
}

fn parse_vectors(s: &str) -> Result<Vec<[f64; 3]>> {
    let mut out = Vec::new();
    let mut rest = s.trim();
    while !rest.is_empty() {
        if rest.starts_with("none") {
            return Err(unsupported("space directions", "none"));
        }
        let end = rest
            .find(')')
            .ok_or_else(|| Error::MalformedNrrd(format!("unterminated vector in {s:?}")))?;
        out.push(parse_vector(&rest[..=end])?);
        rest = rest[end + 1..].trim_start();
    }
    Ok(out)
}

#[derive(Default)]
struct Header {
    sample_type: Option<NrrdType>,
    dimension: Option<usize>,
    sizes: Option<[usize; 3]>,
    directions: Option<Vec<[f64; 3]>>,
    spacings: Option<[f64; 3]>,
    origin: Option<[f64; 3]>,
    encoding: Option<NrrdEncoding>,
    little_endian: Option<bool>,
}

fn parse_header_line(h: &mut Header, key: &str, value: &str) -> Result<()> {
    match key {
        "type" => h.sample_type = Some(NrrdType::parse(value)?),
        "dimension" => {
            let d: usize = value
                .parse()
                .map_err(|_| Error::MalformedNrrd(format!("bad dimension {value:?}")))?;
            if d != 3 {
                return Err(unsupported("dimension", value));
            }
            h.dimension = Some(d);
        }
        "sizes" => {
            let s: Vec<usize> = value
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::MalformedNrrd(format!("bad sizes {value:?}")))?;
            h.sizes = Some(<[usize; 3]>::try_from(s).map_err(|_| unsupported("sizes", value))?);
        }
        "space directions" => h.directions = Some(parse_vectors(value)?),
        "spacings" => {
            let s: Vec<f64> = value
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::MalformedNrrd(format!("bad spacings {value:?}")))?;
            h.spacings = Some(<[f64; 3]>::try_from(s).map_err(|_| unsupported("spacings", value))?);
        }
        "space origin" => h.origin = Some(parse_vector(value)?),
        "endian" => match value {
            "little" => h.little_endian = Some(true),
            "big" => h.little_endian = Some(false),
            other => return Err(unsupported("endian", other)),
        },
        "encoding" => h.encoding = Some(value.parse()?),
        "data file" | "datafile" => return Err(unsupported("data file", value)),
        "space" | "space dimension" => {}
        other => warn!("ignoring NRRD field {other:?}"),
    }
    Ok(())
}

/// Parses the NRRD subset from an in-memory file.
pub fn parse_nrrd(bytes: &[u8]) -> Result<NrrdImage> {
    let mut pos = 0usize;
    let mut next_line = || -> Option<&[u8]> {
        if pos >= bytes.len() {
            return None;
        }
        let end = bytes[pos..].iter().position(|&b| b == b'\n').map_or(bytes.len(), |e| pos + e);
        let line = &bytes[pos..end];
        pos = end + 1;
        Some(line.strip_suffix(b"\r").unwrap_or(line))
    };

    let magic = next_line().ok_or_else(|| Error::MalformedNrrd("empty file".into()))?;
    if !magic.starts_with(b"NRRD000") {
        return Err(Error::MalformedNrrd("missing NRRD magic".into()));
    }
    let mut h = Header::default();
    loop {
        let line = next_line().ok_or_else(|| Error::MalformedNrrd("header not terminated by a blank line".into()))?;
        if line.is_empty() {
            break;
        }
        let line = std::str::from_utf8(line).map_err(|_| Error::MalformedNrrd("non-UTF-8 header".into()))?;
        if line.starts_with('#') || line.contains(":=") {
            continue;
        }
        let (key, value) = line
            .split_once(':')
            .ok_or_else(|| Error::MalformedNrrd(format!("bad header line {line:?}")))?;
        parse_header_line(&mut h, key.trim(), value.trim())?;
    }
    let payload = &bytes[pos.min(bytes.len())..];

    let missing = |f: &str| Error::MalformedNrrd(format!("missing required field {f:?}"));
    let sample_type = h.sample_type.ok_or_else(|| missing("type"))?;
    h.dimension.ok_or_else(|| missing("dimension"))?;
    let dims = h.sizes.ok_or_else(|| missing("sizes"))?;
    let encoding = h.encoding.ok_or_else(|| missing("encoding"))?;
    match h.little_endian {
        Some(false) => return Err(unsupported("endian", "big")),
        None if sample_type.width() > 1 => return Err(missing("endian")),
        _ => {}
    }

    let geometry = match (&h.directions, h.spacings) {
        (Some(dirs), _) => {
            if dirs.len() != 3 {
                return Err(unsupported("space directions", &format!("{} vectors", dirs.len())));
            }
            let mut spacing = [0.0; 3];
            let mut direction = [[0.0; 3]; 3];
            for a in 0..3 {
                let norm = dirs[a].iter().map(|v| v * v).sum::<f64>().sqrt();
                if !(norm > 0.0) {
                    return Err(Error::InvalidGeometry(format!("zero-length direction for axis {a}")));
                }
                spacing[a] = norm;
                direction[a] = dirs[a].map(|v| v / norm);
            }
            VoxelGeometry::new(spacing, h.origin.unwrap_or([0.0; 3]), direction)?
        }
        (None, Some(spacings)) => {
            let mut g = VoxelGeometry::with_spacing(spacings);
            g.origin = h.origin.unwrap_or([0.0; 3]);
            g.validate()?;
            g
        }
        (None, None) => return Err(missing("space directions")),
    };

    let raw = match encoding {
        NrrdEncoding::Raw => payload.to_vec(),
        NrrdEncoding::Gzip => {
            let mut out = Vec::new();
            MultiGzDecoder::new(payload)
                .read_to_end(&mut out)
                .map_err(|e| Error::MalformedNrrd(format!("gzip payload: {e}")))?;
            out
        }
    };
    let n: usize = dims.iter().product();
    let expected = n * sample_type.width();
    if raw.len() != expected {
        return Err(Error::MalformedNrrd(format!(
            "payload has {} bytes, expected {expected}",
            raw.len()
        )));
    }
    let data = match sample_type {
        NrrdType::U8 => NrrdData::U8(raw),
        NrrdType::I16 => NrrdData::I16(raw.chunks_exact(2).map(|c| i16::from_le_bytes([c[0], c[1]])).collect()),
        NrrdType::F32 => NrrdData::F32(
            raw.chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect(),
        ),
    };
    Ok(NrrdImage { dims, geometry, data })
}

/// Reads an NRRD file keeping its sample type.
pub fn read_nrrd_image(path: impl AsRef<Path>) -> Result<NrrdImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_nrrd(&bytes)
}

/// Reads an NRRD file and validates it as the expected kind of grid.
pub fn read_nrrd(path: impl AsRef<Path>, kind: ContentKind) -> Result<LoadedGrid> {
    let img = read_nrrd_image(path)?;
    Ok(match kind {
        ContentKind::Intensity => LoadedGrid::Intensity(img.into_volume()?),
        ContentKind::Binary => LoadedGrid::Binary(img.into_mask()?),
        ContentKind::Probability => LoadedGrid::Probability(img.into_probability()?),
    })
}

pub fn read_volume(path: impl AsRef<Path>) -> Result<Volume3D> {
    read_nrrd_image(path)?.into_volume()
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<LabelMask> {
    read_nrrd_image(path)?.into_mask()
}

pub fn read_probability(path: impl AsRef<Path>) -> Result<ProbabilityMap> {
    read_nrrd_image(path)?.into_probability()
}

fn fmt_vector(v: [f64; 3]) -> String {
    format!("({},{},{})", v[0], v[1], v[2])
}

/// Serializes a grid to NRRD bytes.
pub fn encode_nrrd<G: NrrdSource + ?Sized>(grid: &G, encoding: NrrdEncoding) -> Result<Vec<u8>> {
    let dims = grid.nrrd_dims();
    let g = grid.nrrd_geometry();
    let samples = grid.nrrd_samples();
    let directions: Vec<String> = (0..3)
        .map(|a| fmt_vector(g.direction[a].map(|d| d * g.spacing[a])))
        .collect();
    let mut out = format!(
        "NRRD0004\ntype: {}\ndimension: 3\nspace: left-posterior-superior\nsizes: {} {} {}\n\
         space directions: {}\nendian: little\nencoding: {}\nspace origin: {}\n\n",
        samples.sample_type().name(),
        dims[0],
        dims[1],
        dims[2],
        directions.join(" "),
        match encoding {
            NrrdEncoding::Raw => "raw",
            NrrdEncoding::Gzip => "gzip",
        },
        fmt_vector(g.origin),
    )
    .into_bytes();
    let payload = samples.to_le_bytes();
    match encoding {
        NrrdEncoding::Raw => out.extend_from_slice(&payload),
        NrrdEncoding::Gzip => {
            let mut enc = GzEncoder::new(out, Compression::default());
            enc.write_all(&payload)
                .map_err(|e| Error::MalformedNrrd(format!("gzip: {e}")))?;
            out = enc.finish().map_err(|e| Error::MalformedNrrd(format!("gzip: {e}")))?;
        }
    }
    Ok(out)
}

pub fn write_nrrd<G: NrrdSource + ?Sized>(grid: &G, path: impl AsRef<Path>, encoding: NrrdEncoding) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_nrrd(grid, encoding)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredKind {
    Mask,
    Prob,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredInput {
    pub name: String,
    pub kind: PredKind,
    pub path: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseEntry {
    pub case_id: String,
    pub image: PathBuf,
    pub ref_mask: PathBuf,
    #[serde(default)]
    pub pred: Vec<PredInput>,
    #[serde(default)]
    pub survival_months: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohortManifest {
    pub cases: Vec<CaseEntry>,
}

impl CohortManifest {
    pub fn validate(&self) -> Result<()> {
        if self.cases.is_empty() {
            return Err(Error::Manifest("manifest has no cases".into()));
        }
        let mut seen = HashSet::new();
        for case in &self.cases {
            if case.case_id.is_empty() {
                return Err(Error::Manifest("empty case_id".into()));
            }
            if !seen.insert(case.case_id.as_str()) {
                return Err(Error::DuplicateCaseId(case.case_id.clone()));
            }
            if let Some(m) = case.survival_months {
                if !(m.is_finite() && m >= 0.0) {
                    return Err(Error::Manifest(format!(
                        "case {:?}: survival_months must be non-negative, got {m}",
                        case.case_id
                    )));
                }
            }
        }
        Ok(())
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for case in &mut self.cases {
            fix(&mut case.image);
            fix(&mut case.ref_mask);
            for p in &mut case.pred {
                fix(&mut p.path);
            }
        }
    }

    fn check_files(&self) -> Result<()> {
        for case in &self.cases {
            let paths = [&case.image, &case.ref_mask]
                .into_iter()
                .chain(case.pred.iter().map(|p| &p.path));
            for p in paths {
                if !p.is_file() {
                    return Err(Error::MissingFile {
                        case_id: case.case_id.clone(),
                        path: p.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn find(&self, case_id: &str) -> Option<&CaseEntry> {
        self.cases.iter().find(|c| c.case_id == case_id)
    }
}

/// Parses a manifest from JSON text. Relative paths resolve against `base`.
pub fn parse_manifest(text: &str, base: &Path) -> Result<CohortManifest> {
    let mut m: CohortManifest = serde_json::from_str(text).map_err(|e| Error::Manifest(format!("malformed JSON: {e}")))?;
    m.validate()?;
    m.resolve_paths(base);
    Ok(m)
}

/// Reads a manifest; with `validate` set every referenced file must exist.
pub fn read_manifest(path: impl AsRef<Path>, validate: bool) -> Result<CohortManifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let m = parse_manifest(&text, base)?;
    if validate {
        m.check_files()?;
    }
    Ok(m)
}

pub fn write_manifest(manifest: &CohortManifest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    manifest.validate()?;
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// Feature tables
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureRow {
    pub case_id: String,
    pub values: Vec<f64>,
}

/// Named feature columns, one row per case.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct FeatureTable {
    columns: Vec<String>,
    rows: Vec<FeatureRow>,
}

impl FeatureTable {
    pub fn new(columns: Vec<String>) -> Result<Self> {
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.as_str()) {
                return Err(Error::FeatureTable(format!("duplicate feature name {c:?}")));
            }
        }
        Ok(Self { columns, rows: Vec::new() })
    }

    pub fn push(&mut self, case_id: impl Into<String>, values: Vec<f64>) -> Result<()> {
        let case_id = case_id.into();
        if values.len() != self.columns.len() {
            return Err(Error::FeatureTable(format!(
                "case {case_id:?} has {} values for {} columns",
                values.len(),
                self.columns.len()
            )));
        }
        if case_id.is_empty() {
            return Err(Error::FeatureTable("empty case_id".into()));
        }
        if self.rows.iter().any(|r| r.case_id == case_id) {
            return Err(Error::DuplicateCaseId(case_id));
        }
        self.rows.push(FeatureRow { case_id, values });
        Ok(())
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[FeatureRow] {
        &self.rows
    }

    pub fn row(&self, case_id: &str) -> Option<&FeatureRow> {
        self.rows.iter().find(|r| r.case_id == case_id)
    }

    pub fn sort_by_case_id(&mut self) {
        self.rows.sort_by(|a, b| a.case_id.cmp(&b.case_id));
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

fn fmt_value(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        "nan".to_string()
    }
}

pub fn encode_feature_table(table: &FeatureTable) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::FeatureTable(e.to_string());
    w.write_record(std::iter::once("case_id").chain(table.columns.iter().map(String::as_str)))
        .map_err(csv_err)?;
    for row in &table.rows {
        let mut rec = Vec::with_capacity(row.values.len() + 1);
        rec.push(row.case_id.clone());
        rec.extend(row.values.iter().map(|&v| fmt_value(v)));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::FeatureTable(e.to_string()))
}

pub fn write_feature_table(table: &FeatureTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_feature_table(table)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn parse_feature_table(bytes: &[u8]) -> Result<FeatureTable> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let csv_err = |e: csv::Error| Error::FeatureTable(e.to_string());
    let header = r.headers().map_err(csv_err)?.clone();
    if header.get(0) != Some("case_id") {
        return Err(Error::FeatureTable("first column must be case_id".into()));
    }
    let mut table = FeatureTable::new(header.iter().skip(1).map(str::to_owned).collect())?;
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let case_id = rec.get(0).unwrap_or_default().to_owned();
        let values = rec
            .iter()
            .skip(1)
            .map(|s| match s {
                "nan" | "NaN" => Ok(f64::NAN),
                s => s
                    .parse::<f64>()
                    .map_err(|_| Error::FeatureTable(format!("case {case_id:?}: bad number {s:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        table.push(case_id, values)?;
    }
    Ok(table)
}

pub fn read_feature_table(path: impl AsRef<Path>) -> Result<FeatureTable> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_feature_table(&bytes)
}
