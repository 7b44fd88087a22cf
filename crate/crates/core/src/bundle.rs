//! Directory bundle persistence: manifest.json plus one little-endian
//! f32 blob per matrix and one byte-per-entry mask blob, with optional
//! refinement reports and run summaries as JSON documents.
//!
//! The format is deliberately framework-free: any tensor ecosystem can
//! produce it with a short export script, and bit-exactness is testable
//! byte by byte. Saving is deterministic; no timestamps enter the payload.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::refine::{RowRefineReport, StopReason};
use crate::types::{ActivationMatrix, MaskPattern, SparsityMask, WeightMatrix};

pub const FORMAT_VERSION: u64 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const REPORTS_FILE: &str = "reports.json";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestLayer {
    pub name: String,
    pub c_out: usize,
    pub c_in: usize,
    pub tokens: usize,
    pub weight_file: String,
    pub activation_file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_file: Option<String>,
    pub dtype: String,
    /// "n:m" when the mask carries a block pattern; absent = unstructured.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_pattern: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u64,
    pub layers: Vec<ManifestLayer>,
}

/// One loaded layer: weights, calibration activations, optional mask.
#[derive(Debug, Clone)]
pub struct LayerData {
    pub name: String,
    pub weights: WeightMatrix,
    pub activations: ActivationMatrix,
    pub mask: Option<SparsityMask>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowReportRecord {
    pub cycles_used: u32,
    pub initial_metric: f64,
    pub final_metric: f64,
    pub stop_reason: StopReason,
}

impl From<&RowRefineReport> for RowReportRecord {
    fn from(r: &RowRefineReport) -> Self {
        Self {
            cycles_used: r.cycles_used,
            initial_metric: r.initial_metric,
            final_metric: r.final_metric,
            stop_reason: r.stop_reason,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerReports {
    pub name: String,
    pub rows: Vec<RowReportRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReports {
    pub layers: Vec<LayerReports>,
}

/// Per-layer numbers a pipeline stage reports. initial_error_l2 is the
/// layer error under the mask the stage received (zero when it received
/// none), pruned_error_l2 the error under the one-shot mask, and
/// refined_error_l2 the error after refinement where that stage ran.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSummary {
    pub name: String,
    pub initial_error_l2: f64,
    pub pruned_error_l2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refined_error_l2: Option<f64>,
    pub sparsity_achieved: f64,
    pub total_swaps: u64,
    pub wall_time_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub layers: Vec<LayerSummary>,
}

pub fn format_pattern(p: MaskPattern) -> Option<String> {
    match p {
        MaskPattern::Unstructured => None,
        MaskPattern::NOfM { n, m } => Some(format!("{n}:{m}")),
    }
}

pub fn parse_pattern(s: &str) -> Option<MaskPattern> {
    let (n, m) = s.split_once(':')?;
    let n: u32 = n.parse().ok()?;
    let m: u32 = m.parse().ok()?;
    if m == 0 || n > m {
        return None;
    }
    Some(MaskPattern::NOfM { n, m })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

fn read_sized(path: &Path, expected: u64) -> Result<Vec<u8>> {
    let found = fs::metadata(path).map_err(io_err(path))?.len();
    if found != expected {
        return Err(Error::SizeMismatch { path: path.to_path_buf(), expected, found });
    }
    fs::read(path).map_err(io_err(path))
}

fn decode_f32(bytes: &[u8]) -> Vec<f32> {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect()
}

fn encode_f32(values: &[f32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 4);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        why: e.to_string(),
    })?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        why: e.to_string(),
    })
}

pub fn load_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let manifest: Manifest = read_json(&path)?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::FormatVersion { version: manifest.format_version });
    }
    let mut seen = std::collections::HashSet::new();
    for layer in &manifest.layers {
        if layer.dtype != "f32le" {
            return Err(Error::Format {
                path: path.clone(),
                why: format!("layer {}: unsupported dtype {}", layer.name, layer.dtype),
            });
        }
        if let Some(p) = &layer.mask_pattern {
            if parse_pattern(p).is_none() {
                return Err(Error::Format {
                    path: path.clone(),
                    why: format!("layer {}: malformed mask_pattern {p:?}", layer.name),
                });
            }
        }
        if !seen.insert(layer.name.as_str()) {
            return Err(Error::Format {
                path: path.clone(),
                why: format!("duplicate layer name {:?}", layer.name),
            });
        }
    }
    Ok(manifest)
}

pub fn load_bundle(dir: &Path) -> Result<Vec<LayerData>> {
    let manifest = load_manifest(dir)?;
    let mut layers = Vec::with_capacity(manifest.layers.len());
    for entry in &manifest.layers {
        let wpath = dir.join(&entry.weight_file);
        let wbytes = read_sized(&wpath, (entry.c_out * entry.c_in * 4) as u64)?;
        let weights = WeightMatrix::new(entry.c_out, entry.c_in, decode_f32(&wbytes))?;
        let apath = dir.join(&entry.activation_file);
        let abytes = read_sized(&apath, (entry.c_in * entry.tokens * 4) as u64)?;
        let activations = ActivationMatrix::new(entry.c_in, entry.tokens, decode_f32(&abytes))?;
        let mask = match &entry.mask_file {
            None => None,
            Some(mf) => {
                let mpath = dir.join(mf);
                let bits = read_sized(&mpath, (entry.c_out * entry.c_in) as u64)?;
                let pattern = entry
                    .mask_pattern
                    .as_deref()
                    .and_then(parse_pattern)
                    .unwrap_or(MaskPattern::Unstructured);
                Some(SparsityMask::new(entry.c_out, entry.c_in, bits, pattern)?)
            }
        };
        layers.push(LayerData {
            name: entry.name.clone(),
            weights,
            activations,
            mask,
        });
    }
    Ok(layers)
}

fn blob_names(name: &str) -> (String, String, String) {
    (
        format!("{name}.weights.bin"),
        format!("{name}.activations.bin"),
        format!("{name}.mask.bin"),
    )
}

/// Writes a complete bundle directory. Reports are stored when given;
/// pass them for refinement outputs and None elsewhere.
pub fn save_bundle(dir: &Path, layers: &[LayerData], reports: Option<&RunReports>) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut entries = Vec::with_capacity(layers.len());
    for layer in layers {
        let (wfile, afile, mfile) = blob_names(&layer.name);
        let wpath = dir.join(&wfile);
        fs::write(&wpath, encode_f32(layer.weights.values())).map_err(io_err(&wpath))?;
        let apath = dir.join(&afile);
        fs::write(&apath, encode_f32(layer.activations.values())).map_err(io_err(&apath))?;
        let mut mask_file = None;
        let mut mask_pattern = None;
        if let Some(mask) = &layer.mask {
            let mpath = dir.join(&mfile);
            fs::write(&mpath, mask.bits()).map_err(io_err(&mpath))?;
            mask_file = Some(mfile);
            mask_pattern = format_pattern(mask.pattern());
        }
        entries.push(ManifestLayer {
            name: layer.name.clone(),
            c_out: layer.weights.rows(),
            c_in: layer.weights.cols(),
            tokens: layer.activations.tokens(),
            weight_file: wfile,
            activation_file: afile,
            mask_file,
            dtype: "f32le".into(),
            mask_pattern,
        });
    }
    let manifest = Manifest { format_version: FORMAT_VERSION, layers: entries };
    {
        let mut seen = std::collections::HashSet::new();
        for l in &manifest.layers {
            if !seen.insert(l.name.as_str()) {
                return Err(Error::Format {
                    path: dir.join(MANIFEST_FILE),
                    why: format!("duplicate layer name {:?}", l.name),
                });
            }
        }
    }
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    if let Some(reports) = reports {
        write_json(&dir.join(REPORTS_FILE), reports)?;
    }
    Ok(())
}

pub fn load_reports(dir: &Path) -> Result<RunReports> {
    read_json(&dir.join(REPORTS_FILE))
}

pub fn save_summary(dir: &Path, summary: &RunSummary) -> Result<()> {
    write_json(&dir.join(SUMMARY_FILE), summary)
}

pub fn load_summary(dir: &Path) -> Result<RunSummary> {
    read_json(&dir.join(SUMMARY_FILE))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::refine::StopReason;

    fn sample_layers() -> Vec<LayerData> {
        let w0 = WeightMatrix::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let a0 = ActivationMatrix::new(2, 3, vec![0.5, -1.5, 2.0, 1.0, 0.0, -0.25]).unwrap();
        let m0 = SparsityMask::new(2, 2, vec![1, 0, 0, 1], MaskPattern::Unstructured).unwrap();
        let w1 = WeightMatrix::new(1, 4, vec![-1.0, 0.5, 0.25, 8.0]).unwrap();
        let a1 = ActivationMatrix::new(4, 2, vec![1.0; 8]).unwrap();
        let m1 =
            SparsityMask::new(1, 4, vec![1, 1, 0, 0], MaskPattern::NOfM { n: 2, m: 4 }).unwrap();
        vec![
            LayerData { name: "layer000".into(), weights: w0, activations: a0, mask: Some(m0) },
            LayerData { name: "layer001".into(), weights: w1, activations: a1, mask: Some(m1) },
        ]
    }

    fn sample_reports() -> RunReports {
        RunReports {
            layers: vec![LayerReports {
                name: "layer000".into(),
                rows: vec![
                    RowReportRecord {
                        cycles_used: 3,
                        initial_metric: 1.5,
                        final_metric: 0.05,
                        stop_reason: StopReason::ThresholdMet,
                    },
                    RowReportRecord {
                        cycles_used: 50,
                        initial_metric: 2.0,
                        final_metric: 0.7,
                        stop_reason: StopReason::MaxCycles,
                    },
                ],
            }],
        }
    }

    fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
        let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
            })
            .collect();
        files.sort();
        files
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("bundle");
        let layers = sample_layers();
        save_bundle(&dir, &layers, Some(&sample_reports())).unwrap();
        let loaded = load_bundle(&dir).unwrap();
        assert_eq!(loaded.len(), 2);
        for (orig, got) in layers.iter().zip(&loaded) {
            assert_eq!(got.name, orig.name);
            assert_eq!(got.weights.values(), orig.weights.values());
            assert_eq!(got.activations.values(), orig.activations.values());
            let (om, gm) = (orig.mask.as_ref().unwrap(), got.mask.as_ref().unwrap());
            assert_eq!(gm.bits(), om.bits());
            assert_eq!(gm.pattern(), om.pattern());
        }
        assert_eq!(load_reports(&dir).unwrap(), sample_reports());

        // Saving the loaded objects again yields identical bytes.
        let dir2 = tmp.path().join("bundle2");
        save_bundle(&dir2, &loaded, Some(&sample_reports())).unwrap();
        assert_eq!(dir_bytes(&dir), dir_bytes(&dir2));
    }

    #[test]
    fn weight_blob_is_little_endian_row_major() {
        let tmp = tempfile::tempdir().unwrap();
        let layers = vec![LayerData {
            name: "layer000".into(),
            weights: WeightMatrix::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap(),
            activations: ActivationMatrix::new(2, 1, vec![0.0, 0.0]).unwrap(),
            mask: None,
        }];
        save_bundle(tmp.path(), &layers, None).unwrap();
        let blob = fs::read(tmp.path().join("layer000.weights.bin")).unwrap();
        let want: Vec<u8> = [1.0f32, 2.0, 3.0, 4.0]
            .iter()
            .flat_map(|v| v.to_le_bytes())
            .collect();
        assert_eq!(blob, want);
        assert_eq!(blob.len(), 16);
    }

    #[test]
    fn truncated_blob_names_offending_file() {
        let tmp = tempfile::tempdir().unwrap();
        save_bundle(tmp.path(), &sample_layers(), None).unwrap();
        let victim = tmp.path().join("layer000.weights.bin");
        let bytes = fs::read(&victim).unwrap();
        fs::write(&victim, &bytes[..bytes.len() - 1]).unwrap();
        match load_bundle(tmp.path()) {
            Err(Error::SizeMismatch { path, expected, found }) => {
                assert_eq!(path, victim);
                assert_eq!(expected, 16);
                assert_eq!(found, 15);
            }
            other => panic!("expected size mismatch, got {other:?}"),
        }
    }

    #[test]
    fn missing_file_and_bad_mask_byte_are_distinct() {
        let tmp = tempfile::tempdir().unwrap();
        save_bundle(tmp.path(), &sample_layers(), None).unwrap();
        let mask_path = tmp.path().join("layer000.mask.bin");
        let mut bits = fs::read(&mask_path).unwrap();
        bits[1] = 2;
        fs::write(&mask_path, &bits).unwrap();
        assert!(matches!(
            load_bundle(tmp.path()),
            Err(Error::MaskDomain { row: 0, col: 1, value: 2 })
        ));

        fs::remove_file(tmp.path().join("layer001.weights.bin")).unwrap();
        fs::write(&mask_path, [1u8, 0, 0, 1]).unwrap();
        assert!(matches!(load_bundle(tmp.path()), Err(Error::Io { .. })));
    }

    #[test]
    fn unknown_format_version_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        save_bundle(tmp.path(), &[], None).unwrap();
        let mpath = tmp.path().join(MANIFEST_FILE);
        let text = fs::read_to_string(&mpath).unwrap().replace("\"format_version\": 1", "\"format_version\": 2");
        fs::write(&mpath, text).unwrap();
        assert!(matches!(load_bundle(tmp.path()), Err(Error::FormatVersion { version: 2 })));
    }

    #[test]
    fn empty_layer_list_round_trips() {
        let tmp = tempfile::tempdir().unwrap();
        save_bundle(tmp.path(), &[], None).unwrap();
        let manifest = load_manifest(tmp.path()).unwrap();
        assert!(manifest.layers.is_empty());
        assert!(load_bundle(tmp.path()).unwrap().is_empty());
    }

    #[test]
    fn duplicate_layer_names_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        let mut layers = sample_layers();
        layers[1].name = "layer000".into();
        assert!(matches!(
            save_bundle(tmp.path(), &layers, None),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn pattern_string_round_trip() {
        assert_eq!(parse_pattern("2:4"), Some(MaskPattern::NOfM { n: 2, m: 4 }));
        assert_eq!(parse_pattern("junk"), None);
        assert_eq!(parse_pattern("5:4"), None);
        assert_eq!(parse_pattern("0:0"), None);
        assert_eq!(format_pattern(MaskPattern::NOfM { n: 2, m: 4 }), Some("2:4".into()));
        assert_eq!(format_pattern(MaskPattern::Unstructured), None);

        let tmp = tempfile::tempdir().unwrap();
        save_bundle(tmp.path(), &sample_layers(), None).unwrap();
        let manifest = load_manifest(tmp.path()).unwrap();
        assert_eq!(manifest.layers[1].mask_pattern.as_deref(), Some("2:4"));
        let loaded = load_bundle(tmp.path()).unwrap();
        assert_eq!(loaded[1].mask.as_ref().unwrap().pattern(), MaskPattern::NOfM { n: 2, m: 4 });
    }

    #[test]
    fn summary_round_trip() {
        let tmp = tempfile::tempdir().unwrap();
        let summary = RunSummary {
            layers: vec![LayerSummary {
                name: "layer000".into(),
                initial_error_l2: 0.0,
                pruned_error_l2: 12.5,
                refined_error_l2: Some(11.0),
                sparsity_achieved: 0.6,
                total_swaps: 41,
                wall_time_ms: 7,
            }],
        };
        save_summary(tmp.path(), &summary).unwrap();
        assert_eq!(load_summary(tmp.path()).unwrap(), summary);
    }
}
