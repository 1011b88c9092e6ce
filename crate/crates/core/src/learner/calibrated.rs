use alloc::vec::Vec;

use super::column::ColumnIndex;
use super::gbdt::{boost_binary, check_binary_input, GbdtBinaryModel};
use super::isotonic::{fit_isotonic, IsotonicModel};
use super::matrix::FeatureMatrix;
use super::{LearnError, TrainConfig};

/// Boosted binary model followed by an isotonic map fitted on out-of-fold
/// probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibratedBinaryClassifier {
    base: GbdtBinaryModel,
    calibrator: IsotonicModel,
}

/// Out-of-fold probabilities gathered while fitting, in input row order.
#[derive(Debug, Clone, PartialEq)]
pub struct OutOfFold {
    pub probabilities: Vec<f64>,
    pub labels: Vec<u8>,
    pub folds: Vec<u32>,
}

impl CalibratedBinaryClassifier {
    pub fn new(base: GbdtBinaryModel, calibrator: IsotonicModel) -> Self {
        Self { base, calibrator }
    }

    pub fn base(&self) -> &GbdtBinaryModel {
        &self.base
    }

    pub fn calibrator(&self) -> &IsotonicModel {
        &self.calibrator
    }

    pub fn n_features(&self) -> usize {
        self.base.n_features()
    }

    /// Uncalibrated probability of the base model.
    pub fn predict_raw(&self, x: &[f64]) -> Result<f64, LearnError> {
        self.base.predict_proba(x)
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<f64, LearnError> {
        Ok(self.calibrator.apply(self.base.predict_proba(x)?))
    }

    pub fn predict_proba_batch(&self, x: &FeatureMatrix) -> Result<Vec<f64>, LearnError> {
        let raw = self.base.predict_proba_batch(x)?;
        Ok(raw.into_iter().map(|p| self.calibrator.apply(p)).collect())
    }
}

fn group_hash(seed: u64, group: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in seed.to_le_bytes().iter().chain(group.as_bytes()) {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    // splitmix64 finalizer
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

/// Assigns each row the fold of its group. Distinct groups are ranked by a
/// seeded hash of their id and dealt round-robin, so every fold receives
/// `⌊G/k⌋` or `⌈G/k⌉` groups.
pub fn assign_folds(groups: &[&str], n_folds: usize, seed: u64) -> Result<Vec<u32>, LearnError> {
    if n_folds < 2 {
        return Err(LearnError::InvalidConfig("n_folds must be at least 2"));
    }
    let mut unique: Vec<&str> = groups.to_vec();
    unique.sort_unstable();
    unique.dedup();
    if unique.len() < n_folds {
        return Err(LearnError::TooFewGroups {
            groups: unique.len(),
            folds: n_folds,
        });
    }
    let mut ranked: Vec<(u64, &str)> = unique.iter().map(|g| (group_hash(seed, g), *g)).collect();
    ranked.sort_unstable();
    let mut fold_of: Vec<(&str, u32)> = ranked
        .iter()
        .enumerate()
        .map(|(rank, &(_, g))| (g, (rank % n_folds) as u32))
        .collect();
    fold_of.sort_unstable();
    Ok(groups
        .iter()
        .map(|g| {
            let i = fold_of.binary_search_by(|(k, _)| k.cmp(g)).unwrap();
            fold_of[i].1
        })
        .collect())
}

/// Fits the calibrated classifier: one base model per held-out fold for
/// out-of-fold probabilities, isotonic calibration on the pooled results,
/// then a final base model on every row.
pub fn fit_calibrated(
    x: &FeatureMatrix,
    y: &[u8],
    groups: &[&str],
    cfg: &TrainConfig,
) -> Result<CalibratedBinaryClassifier, LearnError> {
    fit_calibrated_with_oof(x, y, groups, cfg).map(|(m, _)| m)
}

pub fn fit_calibrated_with_oof(
    x: &FeatureMatrix,
    y: &[u8],
    groups: &[&str],
    cfg: &TrainConfig,
) -> Result<(CalibratedBinaryClassifier, OutOfFold), LearnError> {
    let labels = check_binary_input(x, y, cfg)?;
    if groups.len() != x.n_rows() {
        return Err(LearnError::LengthMismatch {
            what: "group ids",
            expected: x.n_rows(),
            found: groups.len(),
        });
    }
    let folds = assign_folds(groups, cfg.n_folds, cfg.seed)?;

    // canonical row order makes the fit independent of input row order
    let mut order: Vec<usize> = (0..x.n_rows()).collect();
    order.sort_by(|&a, &b| {
        groups[a]
            .cmp(groups[b])
            .then_with(|| {
                let (ra, rb) = (x.row(a), x.row(b));
                ra.iter().map(|v| v.to_bits()).cmp(rb.iter().map(|v| v.to_bits()))
            })
            .then(y[a].cmp(&y[b]))
    });
    let xc = x.select_rows(&order);
    let yc: Vec<f64> = order.iter().map(|&i| labels[i]).collect();
    let fold_c: Vec<u32> = order.iter().map(|&i| folds[i]).collect();
    let index = ColumnIndex::new(&xc);

    let mut oof_c = alloc::vec![0.0f64; xc.n_rows()];
    for f in 0..cfg.n_folds as u32 {
        let train: Vec<u32> = (0..xc.n_rows() as u32).filter(|&r| fold_c[r as usize] != f).collect();
        let (model, _) = boost_binary(&index, &yc, Some(&train), cfg)?;
        for r in (0..xc.n_rows()).filter(|&r| fold_c[r] == f) {
            oof_c[r] = model.predict_proba(xc.row(r))?;
        }
    }
    let calibrator = fit_isotonic(&oof_c, &yc)?;
    let (base, _) = boost_binary(&index, &yc, None, cfg)?;

    let mut probabilities = alloc::vec![0.0; x.n_rows()];
    for (c, &i) in order.iter().enumerate() {
        probabilities[i] = oof_c[c];
    }
    let oof = OutOfFold {
        probabilities,
        labels: y.to_vec(),
        folds,
    };
    Ok((CalibratedBinaryClassifier { base, calibrator }, oof))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::string::String;

    fn small() -> TrainConfig {
        TrainConfig {
            n_trees: 15,
            max_depth: 3,
            ..TrainConfig::binary()
        }
    }

    #[test]
    fn three_groups_fill_three_folds() {
        let groups = ["a", "b", "c", "a", "b", "c"];
        let folds = assign_folds(&groups, 3, 0).unwrap();
        let mut seen = [false; 3];
        for (g, f) in groups.iter().zip(&folds) {
            seen[*f as usize] = true;
            let twin = groups.iter().position(|h| h == g).unwrap();
            assert_eq!(folds[twin], *f);
        }
        assert_eq!(seen, [true; 3]);
    }

    #[test]
    fn too_few_groups() {
        assert_eq!(
            assign_folds(&["a", "b", "a"], 3, 0),
            Err(LearnError::TooFewGroups { groups: 2, folds: 3 })
        );
    }

    fn toy() -> (FeatureMatrix, Vec<u8>, Vec<String>) {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        let mut groups = Vec::new();
        for i in 0..120u32 {
            let a = ((i * 37) % 101) as f64 / 101.0;
            rows.push([a, (i % 4) as f64]);
            y.push(u8::from(a > 0.4 || i % 9 == 0));
            groups.push(format!("g{}", i % 12));
        }
        (FeatureMatrix::from_rows(2, &rows).unwrap(), y, groups)
    }

    #[test]
    fn row_permutation_gives_identical_model() {
        let (x, y, groups) = toy();
        let g: Vec<&str> = groups.iter().map(String::as_str).collect();
        let (a, oof_a) = fit_calibrated_with_oof(&x, &y, &g, &small()).unwrap();
        let perm: Vec<usize> = (0..x.n_rows()).rev().collect();
        let xp = x.select_rows(&perm);
        let yp: Vec<u8> = perm.iter().map(|&i| y[i]).collect();
        let gp: Vec<&str> = perm.iter().map(|&i| g[i]).collect();
        let (b, oof_b) = fit_calibrated_with_oof(&xp, &yp, &gp, &small()).unwrap();
        assert_eq!(a, b);
        for (k, &i) in perm.iter().enumerate() {
            assert_eq!(oof_a.probabilities[i], oof_b.probabilities[k]);
        }
    }

    #[test]
    fn calibrated_output_is_monotone_in_margin() {
        let (x, y, groups) = toy();
        let g: Vec<&str> = groups.iter().map(String::as_str).collect();
        let m = fit_calibrated(&x, &y, &g, &small()).unwrap();
        let mut pairs: Vec<(f64, f64)> = x
            .rows()
            .map(|r| (m.base().predict_margin(r).unwrap(), m.predict_proba(r).unwrap()))
            .collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for w in pairs.windows(2) {
            assert!(w[0].1 <= w[1].1);
            assert!((0.0..=1.0).contains(&w[0].1));
        }
    }
}
