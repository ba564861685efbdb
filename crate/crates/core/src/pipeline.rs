//! End-to-end stages: labeling on a reference mesh, remeshing with oracle
//! labels, and reconstruction with a learned classifier.

use std::time::Instant;

use log::{debug, info};

use crate::assembler::{merge_with, sort_candidates, AssemblyRules, BinSource, RejectReason, Rejection};
use crate::candidates::{
    assign_dist_to_ref, assign_ier, build_knn, label_candidates, pair_geodesics, propose_candidates, CandidateTriangle,
    KnnGraph, Label, LabelingParams, UniquePoints,
};
use crate::classifier::{predict_batch, ClassifierWeights, FeatureContext, FeatureVector};
use crate::geodesics::{insert_points, GeodesicMesh};
use crate::mesh::{PointCloud, TriangleMesh};
use crate::rng::stage_seed;
use crate::spatial::TriangleBvh;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub k: usize,
    pub tau: f64,
    pub dist_thresh: f64,
    pub n_points: usize,
    pub n_face_samples: usize,
    pub n_eval_samples: usize,
    pub seed: u64,
    /// Geodesic search radius over the farthest Euclidean partner distance.
    /// Pairs beyond it count as incorrect, so labels are exact only while it
    /// is at least `tau`.
    pub cutoff_multiplier: f64,
    pub rules: AssemblyRules,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            k: 50,
            tau: 1.3,
            dist_thresh: 0.005,
            n_points: 12_800,
            n_face_samples: 10,
            n_eval_samples: 1_000_000,
            seed: 0,
            cutoff_multiplier: 2.0,
            rules: AssemblyRules::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 3 {
            return Err(Error::invalid(format!("k must be at least 3, got {}", self.k)));
        }
        self.labeling().validate()?;
        if self.n_points == 0 || self.n_eval_samples == 0 {
            return Err(Error::invalid("sample counts must be positive"));
        }
        if !(self.cutoff_multiplier >= 1.0) || !self.cutoff_multiplier.is_finite() {
            return Err(Error::invalid(format!(
                "cutoff multiplier must be a finite value >= 1, got {}",
                self.cutoff_multiplier
            )));
        }
        if let Some(a) = self.rules.fold_angle {
            if !(a > 0.0 && a <= std::f64::consts::FRAC_PI_2) {
                return Err(Error::invalid(format!("fold angle must be in (0, 90] degrees, got {}", a.to_degrees())));
            }
        }
        Ok(())
    }

    pub fn labeling(&self) -> LabelingParams {
        LabelingParams {
            tau: self.tau,
            dist_thresh: self.dist_thresh,
            n_face_samples: self.n_face_samples,
        }
    }
}

/// Candidates of a cloud, indexed by its distinct points.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    pub unique: UniquePoints,
    pub knn: KnnGraph,
    pub candidates: Vec<CandidateTriangle>,
}

impl CandidateSet {
    /// Deduplicates the cloud, builds the k-NN graph and proposes candidates.
    pub fn propose(cloud: &PointCloud, k: usize) -> Result<Self> {
        cloud.validate()?;
        let unique = UniquePoints::new(&cloud.points);
        if unique.len() < cloud.len() {
            info!("{} duplicate points merged before k-NN", cloud.len() - unique.len());
        }
        let knn = build_knn(&unique.points, k)?;
        let candidates = propose_candidates(&knn, &unique.points);
        info!("{} candidates from {} distinct points (k = {k})", candidates.len(), unique.len());
        Ok(CandidateSet {
            unique,
            knn,
            candidates,
        })
    }

    /// Candidates with vertex indices into the original cloud.
    pub fn original_candidates(&self) -> Vec<CandidateTriangle> {
        self.candidates
            .iter()
            .map(|c| CandidateTriangle {
                verts: self.unique.to_original(c.verts),
                ..*c
            })
            .collect()
    }

    pub fn features(&self) -> Result<Vec<FeatureVector>> {
        FeatureContext::new(&self.unique.points, &self.knn)?.extract_all(&self.candidates)
    }
}

/// Proposes candidates and labels them against `reference`: IER from
/// geodesics between the points' locations on the reference surface, and
/// mean distance of each candidate face to that surface.
pub fn label(reference: &TriangleMesh, cloud: &PointCloud, cfg: &PipelineConfig) -> Result<CandidateSet> {
    cfg.validate()?;
    let clock = Instant::now();
    let mut set = CandidateSet::propose(cloud, cfg.k)?;
    debug!("proposal took {:?}", clock.elapsed());
    let hints: Option<Vec<u32>> = cloud
        .face_ids
        .as_ref()
        .map(|ids| set.unique.original_of.iter().map(|&o| ids[o as usize]).collect());
    let steiner = insert_points(reference, &set.unique.points, hints.as_deref())?;
    let gm = GeodesicMesh::new(&steiner.mesh)?;
    debug!("reference refinement done at {:?}", clock.elapsed());
    let geo = pair_geodesics(&gm, &steiner.vertex_of, &set.candidates, cfg.cutoff_multiplier)?;
    info!("{} geodesic pairs on a {}-face refined reference", geo.pair_count(), steiner.mesh.face_count());
    debug!("geodesics done at {:?}", clock.elapsed());
    assign_ier(&mut set.candidates, &geo, &set.unique.points)?;
    let bvh = TriangleBvh::new(reference);
    assign_dist_to_ref(
        &mut set.candidates,
        &set.unique.points,
        &bvh,
        cfg.n_face_samples,
        stage_seed(cfg.seed, "face-distance"),
    );
    debug!("reference distances done at {:?}", clock.elapsed());
    label_candidates(&mut set.candidates, &cfg.labeling())?;
    Ok(set)
}

/// Output of a remeshing or reconstruction run, in original point indices.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub mesh: TriangleMesh,
    pub rejections: Vec<Rejection>,
    pub n_candidates: usize,
    /// Candidates dropped as incorrect before merging.
    pub n_filtered: usize,
}

impl Reconstruction {
    pub fn rejected(&self, reason: RejectReason) -> usize {
        self.rejections.iter().filter(|r| r.reason == reason).count()
    }
}

fn assemble(
    set: &CandidateSet,
    cloud: &PointCloud,
    survivors: &[CandidateTriangle],
    bins: BinSource,
    rules: AssemblyRules,
) -> Result<Reconstruction> {
    let order = sort_candidates(survivors, bins)?;
    let out = merge_with(&order, &set.unique.points, rules)?;
    let faces = out.mesh.faces.iter().map(|&f| set.unique.to_original(f)).collect();
    let rejections = out
        .rejections
        .iter()
        .map(|r| Rejection {
            verts: set.unique.to_original(r.verts),
            reason: r.reason,
        })
        .collect();
    let rec = Reconstruction {
        mesh: TriangleMesh::new(cloud.points.clone(), faces)?,
        rejections,
        n_candidates: set.candidates.len(),
        n_filtered: set.candidates.len() - survivors.len(),
    };
    info!(
        "accepted {} faces; rejected {} (intersection), {} (non-manifold), {} (non-manifold vertex), {} (fold); {} filtered",
        rec.mesh.face_count(),
        rec.rejected(RejectReason::Intersection),
        rec.rejected(RejectReason::NonManifold),
        rec.rejected(RejectReason::NonManifoldVertex),
        rec.rejected(RejectReason::Fold),
        rec.n_filtered
    );
    Ok(rec)
}

fn keep_correct(cands: &[CandidateTriangle]) -> Vec<CandidateTriangle> {
    cands
        .iter()
        .copied()
        .filter(|c| matches!(c.label, Some(Label::NearSurface | Label::Correct)))
        .collect()
}

/// Remeshing with ground-truth labels: drop incorrect candidates, visit the
/// rest by label then longest edge, and merge.
pub fn remesh(reference: &TriangleMesh, cloud: &PointCloud, cfg: &PipelineConfig) -> Result<Reconstruction> {
    let set = label(reference, cloud, cfg)?;
    remesh_labeled(&set, cloud, cfg)
}

/// [`remesh`] for an already labeled candidate set.
pub fn remesh_labeled(set: &CandidateSet, cloud: &PointCloud, cfg: &PipelineConfig) -> Result<Reconstruction> {
    assemble(set, cloud, &keep_correct(&set.candidates), BinSource::Label, cfg.rules)
}

/// Merges every candidate without the IER filter, binned by reference
/// distance. Useful to measure what the filter contributes.
pub fn remesh_unfiltered(set: &CandidateSet, cloud: &PointCloud, cfg: &PipelineConfig) -> Result<Reconstruction> {
    assemble(set, cloud, &set.candidates, BinSource::RefDistance(cfg.dist_thresh), cfg.rules)
}

/// Reconstruction with a learned classifier in place of ground-truth labels.
pub fn reconstruct(cloud: &PointCloud, weights: &ClassifierWeights, cfg: &PipelineConfig) -> Result<Reconstruction> {
    cfg.validate()?;
    let mut set = CandidateSet::propose(cloud, cfg.k)?;
    let feats = set.features()?;
    let preds = predict_batch(weights, &feats)?;
    for (c, p) in set.candidates.iter_mut().zip(&preds) {
        c.label = Some(p.label);
    }
    assemble(&set, cloud, &keep_correct(&set.candidates), BinSource::Label, cfg.rules)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{Activation, Layer, FEATURE_DIM};
    use crate::sampling::{poisson_disk_sample, to_point_cloud};
    use crate::shapes;

    fn small_cfg() -> PipelineConfig {
        PipelineConfig {
            k: 12,
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn defaults() {
        let c = PipelineConfig::default();
        assert_eq!((c.k, c.tau, c.dist_thresh, c.n_points, c.n_face_samples), (50, 1.3, 0.005, 12_800, 10));
        assert_eq!((c.n_eval_samples, c.cutoff_multiplier), (1_000_000, 2.0));
        assert!(PipelineConfig { k: 2, ..c }.validate().is_err());
        assert!(PipelineConfig { cutoff_multiplier: 0.5, ..c }.validate().is_err());
    }

    #[test]
    fn remesh_small_sphere() {
        let s = shapes::icosphere(0.5, 2);
        let cloud = to_point_cloud(&poisson_disk_sample(&s, 300, 1).unwrap());
        let rec = remesh(&s, &cloud, &small_cfg()).unwrap();
        assert!(rec.mesh.non_manifold_edges().is_empty());
        assert!(rec.mesh.face_count() > 400, "{} faces", rec.mesh.face_count());
        let r = crate::metrics::evaluate(&rec.mesh, &s, 20_000, 0).unwrap();
        assert!(r.fscore_2mu > 0.9, "{r:?}");
    }

    #[test]
    fn duplicates_map_to_first_occurrence() {
        let s = shapes::icosphere(0.5, 1);
        let base = to_point_cloud(&poisson_disk_sample(&s, 120, 3).unwrap());
        let cloud = crate::sampling::replicate_to_size(&base, 150, 4).unwrap();
        let rec = remesh(&s, &cloud, &small_cfg()).unwrap();
        assert_eq!(rec.mesh.vertex_count(), 150);
        assert!(rec.mesh.faces.iter().flatten().all(|&v| v < 120));
    }

    #[test]
    fn reconstruct_with_forced_labels() {
        let s = shapes::icosphere(0.5, 2);
        let cloud = to_point_cloud(&poisson_disk_sample(&s, 200, 2).unwrap());
        // Bias forces label 2 for every candidate.
        let layer = Layer::new(FEATURE_DIM, 3, Activation::Linear, vec![0.0; FEATURE_DIM * 3], vec![0.0, 0.0, 1.0]).unwrap();
        let w = ClassifierWeights::new(vec![layer]).unwrap();
        let rec = reconstruct(&cloud, &w, &small_cfg()).unwrap();
        assert_eq!(rec.n_filtered, 0);
        assert!(rec.mesh.face_count() > 0);
        assert!(rec.mesh.non_manifold_edges().is_empty());
        let reject_all = Layer::new(FEATURE_DIM, 3, Activation::Linear, vec![0.0; FEATURE_DIM * 3], vec![0.0; 3]).unwrap();
        let rec = reconstruct(&cloud, &ClassifierWeights::new(vec![reject_all]).unwrap(), &small_cfg()).unwrap();
        assert_eq!(rec.mesh.face_count(), 0);
    }
}
