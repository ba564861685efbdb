//! Three-class candidate classification: ground-truth (oracle) labels or a
//! small feed-forward network over hand-crafted local features.

mod features;
mod weights;

use std::io::{Read, Write};

use rayon::prelude::*;

use crate::candidates::{label_for, CandidateTriangle, Label, LabelingParams};
use crate::{Error, Result};

pub use features::{FeatureContext, FeatureVector, FEATURE_DIM};
pub use weights::{Activation, ClassifierWeights, Layer, Prediction, N_CLASSES, WEIGHTS_VERSION};

/// Labels from each candidate's IER and reference distance, as produced by
/// [`crate::candidates::label_candidates`].
pub fn oracle_classify(candidates: &[CandidateTriangle], params: &LabelingParams) -> Result<Vec<Label>> {
    candidates
        .iter()
        .map(|c| match (c.ier, c.dist_to_ref) {
            (Some(ier), Some(d)) => Ok(label_for(ier, d, params)),
            _ => Err(Error::invalid(format!("candidate {:?} lacks an IER or reference distance", c.verts))),
        })
        .collect()
}

/// Predictions for many feature vectors, in order.
pub fn predict_batch(weights: &ClassifierWeights, features: &[FeatureVector]) -> Result<Vec<Prediction>> {
    features.par_iter().map(|f| weights.predict(f)).collect()
}

/// Row-normalized 3×3 confusion matrix: entry `[i][j]` is the fraction of
/// class-`i` items predicted as `j`. Rows of absent classes are all zero.
pub fn confusion_matrix(predicted: &[Label], truth: &[Label]) -> Result<[[f64; 3]; 3]> {
    if predicted.len() != truth.len() {
        return Err(Error::Dimension(format!(
            "{} predictions for {} true labels",
            predicted.len(),
            truth.len()
        )));
    }
    let mut counts = [[0usize; 3]; 3];
    for (p, t) in predicted.iter().zip(truth) {
        counts[t.index()][p.index()] += 1;
    }
    Ok(counts.map(|row| {
        let n: usize = row.iter().sum();
        row.map(|c| if n == 0 { 0.0 } else { c as f64 / n as f64 })
    }))
}

/// Confusion matrix as a small text table, percentages with one decimal.
pub fn format_confusion(m: &[[f64; 3]; 3]) -> String {
    let mut s = String::from("truth\\pred       0       1       2\n");
    for (i, row) in m.iter().enumerate() {
        s.push_str(&format!(
            "{i:<10} {:>6.1}% {:>6.1}% {:>6.1}%\n",
            100.0 * row[0],
            100.0 * row[1],
            100.0 * row[2]
        ));
    }
    s
}

const FEATURE_MAGIC: &[u8; 4] = b"IERF";

/// Writes a feature dump: magic `IERF`, count u64, dimension u32, then one
/// f32 row per record, little-endian. Row `i` belongs to record `i` of the
/// matching candidate dump.
pub fn write_features<W: Write>(mut w: W, rows: &[FeatureVector]) -> Result<()> {
    w.write_all(FEATURE_MAGIC)?;
    w.write_all(&(rows.len() as u64).to_le_bytes())?;
    w.write_all(&(FEATURE_DIM as u32).to_le_bytes())?;
    for row in rows {
        for &v in row {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a feature dump into rows of `f32`.
pub fn read_features<R: Read>(mut r: R) -> Result<Vec<Vec<f32>>> {
    let mut head = [0u8; 16];
    r.read_exact(&mut head)?;
    if &head[0..4] != FEATURE_MAGIC {
        return Err(Error::BadMagic {
            expected: "IERF".into(),
            found: String::from_utf8_lossy(&head[0..4]).into_owned(),
        });
    }
    let count = u64::from_le_bytes(head[4..12].try_into().unwrap());
    let dim = u32::from_le_bytes(head[12..16].try_into().unwrap()) as usize;
    if dim == 0 {
        return Err(Error::Dimension("feature dimension is zero".into()));
    }
    let mut out = Vec::with_capacity(count.min(1 << 20) as usize);
    let mut buf = vec![0u8; 4 * dim];
    for i in 0..count {
        r.read_exact(&mut buf)
            .map_err(|_| Error::invalid(format!("feature dump truncated at row {i} of {count}")))?;
        out.push(buf.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect());
    }
    Ok(out)
}
