//! Dataset synthesis: split source images, tile them, compress once/twice
//! per (QF1, QF2), manifest everything, and serve deterministic paired
//! batches.
//!
//! Both classes are written with the same final quality QF2, so the final
//! quantization table carries no label information: the single class is
//! encoded once at QF2, the double class at QF1 then recompressed at QF2.

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dctinput::assemble_subbands;
use crate::jpeg::{encode_gray, read_pgm, recompress, CodecError, GrayImage};
use crate::tensor::{Scalar, Tensor};

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("codec error: {0}")]
    Codec(#[from] CodecError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid dataset input: {0}")]
    Invalid(String),
    #[error("manifest error: {0}")]
    Manifest(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Single,
    Double,
}

/// One 256x256 quadrant tile cut from a 512x512 source image.
#[derive(Debug, Clone)]
pub struct Tile {
    pub id: String,
    pub source: String,
    pub split: Split,
    pub image: GrayImage,
}

/// One line of the JSONL manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub tile_id: String,
    pub source_image: String,
    pub split: Split,
    pub label: Label,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qf1: Option<u32>,
    pub qf2: u32,
    pub file_path: String,
    pub pair_id: String,
}

/// Network-ready pair of sub-band tensors from the same source tile.
#[derive(Debug, Clone)]
pub struct PairSample<T: Scalar> {
    pub single: Tensor<T>,
    pub double: Tensor<T>,
    pub tile_id: String,
}

/// The QF grid the experiments run over.
pub const QF_GRID: [u32; 8] = [60, 65, 70, 75, 80, 85, 90, 95];

fn quadrants(img: &GrayImage) -> [GrayImage; 4] {
    assert_eq!((img.width, img.height), (512, 512));
    let cut = |ox: usize, oy: usize| {
        let mut samples = Vec::with_capacity(256 * 256);
        for y in 0..256 {
            let row = (oy + y) * 512 + ox;
            samples.extend_from_slice(&img.samples[row..row + 256]);
        }
        GrayImage::new(256, 256, samples)
    };
    // top-left, top-right, bottom-left, bottom-right
    [cut(0, 0), cut(256, 0), cut(0, 256), cut(256, 256)]
}

/// Read 512x512 P5 files, split source images 3:1 (train:test) after a
/// seeded shuffle, and cut each image into its four quadrant tiles.
pub fn split_and_tile(pgm_dir: &Path, seed: u64) -> Result<Vec<Tile>, DatasetError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(pgm_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().map(|e| e == "pgm").unwrap_or(false))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(DatasetError::Invalid(format!(
            "no .pgm files in {}",
            pgm_dir.display()
        )));
    }

    let mut order: Vec<usize> = (0..paths.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let n_train = paths.len() * 3 / 4;

    let mut tiles = Vec::with_capacity(paths.len() * 4);
    for (rank, &idx) in order.iter().enumerate() {
        let path = &paths[idx];
        let img = read_pgm(path)?;
        if (img.width, img.height) != (512, 512) {
            return Err(DatasetError::Invalid(format!(
                "{}: expected 512x512, got {}x{}",
                path.display(),
                img.width,
                img.height
            )));
        }
        let split = if rank < n_train {
            Split::Train
        } else {
            Split::Test
        };
        let stem = path.file_stem().unwrap().to_string_lossy().to_string();
        for (q, tile) in quadrants(&img).into_iter().enumerate() {
            tiles.push(Tile {
                id: format!("{stem}_q{q}"),
                source: stem.clone(),
                split,
                image: tile,
            });
        }
    }
    // deterministic output order regardless of shuffle
    tiles.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(tiles)
}

/// Reassign a fraction of the train tiles to validation, 11:1 at tile level.
/// Pairs are intact by construction (a tile yields exactly one pair).
pub fn train_val_split(tiles: &mut [Tile], seed: u64) {
    let train_idx: Vec<usize> = tiles
        .iter()
        .enumerate()
        .filter(|(_, t)| t.split == Split::Train)
        .map(|(i, _)| i)
        .collect();
    let n_val = train_idx.len() / 12;
    let mut order = train_idx;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x76616c); // distinct stream
    order.shuffle(&mut rng);
    for &i in order.iter().take(n_val) {
        tiles[i].split = Split::Val;
    }
}

fn check_qf_pair(qf1: u32, qf2: u32) -> Result<(), DatasetError> {
    if !QF_GRID.contains(&qf1) || !QF_GRID.contains(&qf2) {
        return Err(DatasetError::Invalid(format!(
            "qf values ({qf1}, {qf2}) must lie on the 60..=95 step-5 grid"
        )));
    }
    if qf1 == qf2 {
        return Err(DatasetError::Invalid(
            "qf1 == qf2 is not a double-compression cell (diagonal rejected)".into(),
        ));
    }
    Ok(())
}

/// Compress every tile once (QF2) and twice (QF1 then QF2), write the files
/// under `out_dir/<qf1>_<qf2>/{single,double}/`, and return the manifest.
pub fn materialize_pair_dataset(
    tiles: &[Tile],
    qf1: u32,
    qf2: u32,
    out_dir: &Path,
) -> Result<Vec<ManifestRecord>, DatasetError> {
    check_qf_pair(qf1, qf2)?;
    let base = out_dir.join(format!("{qf1}_{qf2}"));
    let single_dir = base.join("single");
    let double_dir = base.join("double");
    fs::create_dir_all(&single_dir)?;
    fs::create_dir_all(&double_dir)?;

    let mut records = Vec::with_capacity(tiles.len() * 2);
    for tile in tiles {
        let single = encode_gray(&tile.image, qf2)?;
        let double = recompress(&encode_gray(&tile.image, qf1)?, qf2)?;

        let spath = single_dir.join(format!("{}.jpg", tile.id));
        let dpath = double_dir.join(format!("{}.jpg", tile.id));
        fs::write(&spath, &single)?;
        fs::write(&dpath, &double)?;

        records.push(ManifestRecord {
            tile_id: tile.id.clone(),
            source_image: tile.source.clone(),
            split: tile.split,
            label: Label::Single,
            qf1: None,
            qf2,
            file_path: spath.to_string_lossy().into_owned(),
            pair_id: tile.id.clone(),
        });
        records.push(ManifestRecord {
            tile_id: tile.id.clone(),
            source_image: tile.source.clone(),
            split: tile.split,
            label: Label::Double,
            qf1: Some(qf1),
            qf2,
            file_path: dpath.to_string_lossy().into_owned(),
            pair_id: tile.id.clone(),
        });
    }
    Ok(records)
}

pub fn write_manifest(records: &[ManifestRecord], path: &Path) -> Result<(), DatasetError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r)
            .map_err(|e| DatasetError::Manifest(e.to_string()))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRecord>, DatasetError> {
    let f = fs::File::open(path)?;
    let mut records = Vec::new();
    for (i, line) in std::io::BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r: ManifestRecord = serde_json::from_str(&line)
            .map_err(|e| DatasetError::Manifest(format!("line {}: {e}", i + 1)))?;
        records.push(r);
    }
    validate_manifest(&records)?;
    Ok(records)
}

/// Hard checks: every double record pairs with exactly one single record of
/// the same tile, and no source image crosses the train/test boundary.
pub fn validate_manifest(records: &[ManifestRecord]) -> Result<(), DatasetError> {
    let singles: HashSet<&str> = records
        .iter()
        .filter(|r| r.label == Label::Single)
        .map(|r| r.pair_id.as_str())
        .collect();
    for r in records.iter().filter(|r| r.label == Label::Double) {
        if !singles.contains(r.pair_id.as_str()) {
            return Err(DatasetError::Manifest(format!(
                "double record {} has no single counterpart",
                r.tile_id
            )));
        }
    }
    let mut train_sources = HashSet::new();
    let mut test_sources = HashSet::new();
    for r in records {
        match r.split {
            Split::Train | Split::Val => train_sources.insert(r.source_image.as_str()),
            Split::Test => test_sources.insert(r.source_image.as_str()),
        };
    }
    if let Some(leak) = train_sources.intersection(&test_sources).next() {
        return Err(DatasetError::Manifest(format!(
            "source image {leak} contributes tiles to both train and test"
        )));
    }
    Ok(())
}

/// Load the pair samples of one split as sub-band tensors.
pub fn load_pairs<T: Scalar>(
    records: &[ManifestRecord],
    split: Split,
) -> Result<Vec<PairSample<T>>, DatasetError> {
    let mut pairs = Vec::new();
    let mut by_pair: std::collections::BTreeMap<&str, (Option<&ManifestRecord>, Option<&ManifestRecord>)> =
        Default::default();
    for r in records.iter().filter(|r| r.split == split) {
        let slot = by_pair.entry(r.pair_id.as_str()).or_default();
        match r.label {
            Label::Single => slot.0 = Some(r),
            Label::Double => slot.1 = Some(r),
        }
    }
    for (pair_id, (s, d)) in by_pair {
        let (s, d) = match (s, d) {
            (Some(s), Some(d)) => (s, d),
            _ => {
                return Err(DatasetError::Manifest(format!(
                    "pair {pair_id} is incomplete in split {split:?}"
                )))
            }
        };
        let load = |path: &str| -> Result<Tensor<T>, DatasetError> {
            let bytes = fs::read(path)?;
            let c = crate::jpeg::decode_to_coeffs(&bytes)?;
            Ok(assemble_subbands(&c))
        };
        pairs.push(PairSample {
            single: load(&s.file_path)?,
            double: load(&d.file_path)?,
            tile_id: pair_id.to_string(),
        });
    }
    Ok(pairs)
}

/// Batch schedule for one epoch: each batch is `batch_size / 2` pair indices
/// (expanded to singles + doubles by the trainer). Pair order reshuffles
/// every epoch from (seed, epoch); trailing partial batches are dropped.
pub fn batch_iterator(
    n_pairs: usize,
    epoch: usize,
    seed: u64,
    batch_size: usize,
) -> Result<Vec<Vec<usize>>, DatasetError> {
    let per_batch = batch_size / 2;
    if n_pairs < per_batch {
        return Err(DatasetError::Invalid(format!(
            "need at least {per_batch} pairs per batch, have {n_pairs}"
        )));
    }
    let mut order: Vec<usize> = (0..n_pairs).collect();
    let mut rng =
        ChaCha8Rng::seed_from_u64(seed ^ (epoch as u64).wrapping_mul(0x9e3779b97f4a7c15));
    order.shuffle(&mut rng);
    Ok(order
        .chunks_exact(per_batch)
        .map(|c| c.to_vec())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jpeg::{decode_to_coeffs, quant_table_for_qf, write_pgm};
    use crate::synth::synth_image;

    fn fixture_dir(n: usize) -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        for i in 0..n {
            let img = synth_image(512, 512, i as u64 + 1);
            write_pgm(&img, &dir.path().join(format!("img{i:03}.pgm"))).unwrap();
        }
        dir
    }

    #[test]
    fn ratio_and_tiling_arithmetic() {
        let dir = fixture_dir(4);
        let tiles = split_and_tile(dir.path(), 7).unwrap();
        assert_eq!(tiles.len(), 16);
        let train = tiles.iter().filter(|t| t.split == Split::Train).count();
        let test = tiles.iter().filter(|t| t.split == Split::Test).count();
        assert_eq!((train, test), (12, 4));
        // stable across reruns
        let again = split_and_tile(dir.path(), 7).unwrap();
        for (a, b) in tiles.iter().zip(&again) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.split, b.split);
            assert_eq!(a.image, b.image);
        }
    }

    #[test]
    fn quadrants_reassemble_exactly() {
        let img = synth_image(512, 512, 9);
        let quads = quadrants(&img);
        for y in 0..512 {
            for x in 0..512 {
                let q = (y / 256) * 2 + (x / 256);
                let v = quads[q].samples[(y % 256) * 256 + (x % 256)];
                assert_eq!(v, img.samples[y * 512 + x]);
            }
        }
    }

    #[test]
    fn non_512_rejected_with_filename() {
        let dir = tempfile::tempdir().unwrap();
        let img = synth_image(256, 256, 1);
        write_pgm(&img, &dir.path().join("small.pgm")).unwrap();
        let err = split_and_tile(dir.path(), 1).unwrap_err();
        assert!(err.to_string().contains("small.pgm"));
    }

    #[test]
    fn train_val_split_keeps_pairs_and_ratio() {
        // 12 train pairs -> 11 train / 1 val
        let dir = fixture_dir(4);
        let mut tiles = split_and_tile(dir.path(), 3).unwrap();
        train_val_split(&mut tiles, 3);
        let train = tiles.iter().filter(|t| t.split == Split::Train).count();
        let val = tiles.iter().filter(|t| t.split == Split::Val).count();
        assert_eq!((train, val), (11, 1));
    }

    #[test]
    fn materialize_writes_pairs_with_final_qf_table() {
        let dir = fixture_dir(1);
        let out = tempfile::tempdir().unwrap();
        let tiles = split_and_tile(dir.path(), 1).unwrap();
        let records = materialize_pair_dataset(&tiles, 60, 95, out.path()).unwrap();
        assert_eq!(records.len(), tiles.len() * 2);
        let expect = quant_table_for_qf(95).unwrap();
        for r in &records {
            let bytes = fs::read(&r.file_path).unwrap();
            let c = decode_to_coeffs(&bytes).unwrap();
            assert_eq!(c.quant, expect, "{}", r.file_path);
        }
    }

    #[test]
    fn diagonal_and_off_grid_rejected() {
        let dir = fixture_dir(1);
        let out = tempfile::tempdir().unwrap();
        let tiles = split_and_tile(dir.path(), 1).unwrap();
        assert!(materialize_pair_dataset(&tiles, 70, 70, out.path()).is_err());
        assert!(materialize_pair_dataset(&tiles, 50, 95, out.path()).is_err());
    }

    #[test]
    fn manifest_round_trips_and_validates() {
        let dir = fixture_dir(1);
        let out = tempfile::tempdir().unwrap();
        let mut tiles = split_and_tile(dir.path(), 1).unwrap();
        train_val_split(&mut tiles, 1);
        let records = materialize_pair_dataset(&tiles, 60, 75, out.path()).unwrap();
        let mpath = out.path().join("manifest.jsonl");
        write_manifest(&records, &mpath).unwrap();
        let back = read_manifest(&mpath).unwrap();
        assert_eq!(records, back);
    }

    #[test]
    fn leakage_detected() {
        let mut records = vec![
            ManifestRecord {
                tile_id: "a_q0".into(),
                source_image: "a".into(),
                split: Split::Train,
                label: Label::Single,
                qf1: None,
                qf2: 75,
                file_path: "x".into(),
                pair_id: "a_q0".into(),
            },
            ManifestRecord {
                tile_id: "a_q0".into(),
                source_image: "a".into(),
                split: Split::Train,
                label: Label::Double,
                qf1: Some(60),
                qf2: 75,
                file_path: "y".into(),
                pair_id: "a_q0".into(),
            },
        ];
        validate_manifest(&records).unwrap();
        let mut leaked = records[0].clone();
        leaked.tile_id = "a_q1".into();
        leaked.pair_id = "a_q1".into();
        leaked.split = Split::Test;
        records.push(leaked.clone());
        let mut pair = leaked;
        pair.label = Label::Double;
        records.push(pair);
        assert!(validate_manifest(&records).is_err());
    }

    #[test]
    fn batches_are_balanced_and_reshuffled() {
        let batches = batch_iterator(110, 1, 9, 50).unwrap();
        assert_eq!(batches.len(), 4); // 110 / 25, partial dropped
        for b in &batches {
            assert_eq!(b.len(), 25);
        }
        let e1: Vec<usize> = batch_iterator(110, 1, 9, 50).unwrap().concat();
        let e2: Vec<usize> = batch_iterator(110, 2, 9, 50).unwrap().concat();
        assert_eq!(e1, batch_iterator(110, 1, 9, 50).unwrap().concat()); // deterministic
        let moved = e1.iter().zip(&e2).filter(|(a, b)| a != b).count();
        assert!(moved * 100 >= e1.len() * 99, "only {moved} moved");
    }

    #[test]
    fn too_few_pairs_rejected() {
        assert!(batch_iterator(10, 1, 0, 50).is_err());
    }
}
