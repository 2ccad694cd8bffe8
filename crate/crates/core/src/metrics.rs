//! Pixel-wise detection metrics pooled over a whole dataset, and a
//! non-learned threshold detector.
//!
//! A pixel is called positive when its probability is `>= threshold`.

use serde::{Deserialize, Serialize};

use crate::backproject::BpImage;
use crate::error::{Error, Result};
use crate::phantom::{interior_mask, Contour};

/// Probability clip used by [`bce_loss`].
pub const BCE_EPS: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct MaskPair {
    pub width: usize,
    pub height: usize,
    pub prob: Vec<f64>,
    pub truth: Vec<u8>,
}

impl MaskPair {
    pub fn new(width: usize, height: usize, prob: Vec<f64>, truth: Vec<u8>) -> Result<Self> {
        let n = width * height;
        if prob.len() != n || truth.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "{width}x{height} masks need {n} pixels, got prob {} and truth {}",
                prob.len(),
                truth.len()
            )));
        }
        if let Some(k) = prob.iter().position(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidArgument(format!("probability {} at pixel {k} is outside [0, 1]", prob[k])));
        }
        if let Some(k) = truth.iter().position(|&t| t > 1) {
            return Err(Error::InvalidArgument(format!("truth value {} at pixel {k} is not binary", truth[k])));
        }
        Ok(Self {
            width,
            height,
            prob,
            truth,
        })
    }
}

fn check_shapes(pairs: &[MaskPair]) -> Result<()> {
    if let Some(first) = pairs.first() {
        if let Some(k) = pairs.iter().position(|p| p.width != first.width || p.height != first.height) {
            return Err(Error::ShapeMismatch(format!(
                "mask {k} is {}x{}, expected {}x{}",
                pairs[k].width, pairs[k].height, first.width, first.height
            )));
        }
    }
    Ok(())
}

/// Mean binary cross-entropy over every pixel of the dataset.
pub fn bce_loss(pairs: &[MaskPair]) -> Result<f64> {
    check_shapes(pairs)?;
    let (mut sum, mut n) = (0.0, 0usize);
    for pair in pairs {
        for (&p, &y) in pair.prob.iter().zip(&pair.truth) {
            let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
            sum -= if y == 1 { p.ln() } else { (1.0 - p).ln() };
        }
        n += pair.prob.len();
    }
    if n == 0 {
        return Err(Error::InvalidArgument("no pixels to score".into()));
    }
    Ok(sum / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub p_fa: f64,
    pub p_d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// Thresholds strictly decreasing, from (1, 0, 0) to (0, 1, 1).
    pub points: Vec<RocPoint>,
    pub positives: u64,
    pub negatives: u64,
}

impl RocCurve {
    /// Trapezoidal area under P_D(P_FA).
    pub fn auc(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].p_fa - w[0].p_fa) * 0.5 * (w[0].p_d + w[1].p_d))
            .sum()
    }
}

/// Pooled ROC sweep over every distinct probability in the dataset. Pixels
/// that share a score switch together.
pub fn roc_curve(pairs: &[MaskPair]) -> Result<RocCurve> {
    check_shapes(pairs)?;
    let mut scored: Vec<(f64, bool)> = pairs
        .iter()
        .flat_map(|p| p.prob.iter().zip(&p.truth).map(|(&s, &y)| (s, y == 1)))
        .collect();
    let positives = scored.iter().filter(|s| s.1).count() as u64;
    let negatives = scored.len() as u64 - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::DegenerateLabels(format!("{positives} positive and {negatives} negative pixels")));
    }
    scored.sort_unstable_by(|a, b| b.0.total_cmp(&a.0));

    let (np, nn) = (positives as f64, negatives as f64);
    // Above every probability nothing is positive.
    let top = if scored[0].0 < 1.0 { 1.0 } else { f64::from_bits(1.0f64.to_bits() + 1) };
    let mut points = vec![RocPoint {
        threshold: top,
        p_fa: 0.0,
        p_d: 0.0,
    }];
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut k = 0;
    while k < scored.len() {
        let s = scored[k].0;
        while k < scored.len() && scored[k].0 == s {
            if scored[k].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        points.push(RocPoint {
            threshold: s,
            p_fa: fp as f64 / nn,
            p_d: tp as f64 / np,
        });
    }
    // Every pixel is positive at the lowest score, so any lower threshold
    // gives the same counts.
    if let Some(last) = points.last_mut() {
        last.threshold = 0.0;
    }
    Ok(RocCurve {
        points,
        positives,
        negatives,
    })
}

/// Operating point with P_FA not above `target_pfa`. Among those the
/// lowest threshold wins, since it has the highest P_D.
pub fn threshold_at_pfa(curve: &RocCurve, target_pfa: f64) -> Result<RocPoint> {
    if !(target_pfa > 0.0 && target_pfa < 1.0) {
        return Err(Error::InvalidArgument(format!("target P_FA {target_pfa} must lie in (0, 1)")));
    }
    let first = *curve
        .points
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty ROC curve".into()))?;
    Ok(curve
        .points
        .iter()
        .take_while(|p| p.p_fa <= target_pfa)
        .last()
        .copied()
        .unwrap_or(first))
}

/// Binarise `prob` at `threshold`.
pub fn binarize(prob: &[f64], threshold: f64) -> Vec<u8> {
    prob.iter().map(|&p| u8::from(p >= threshold)).collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn f1(&self) -> f64 {
        let den = self.tp as f64 + 0.5 * (self.fp + self.fn_) as f64;
        if den == 0.0 {
            0.0
        } else {
            self.tp as f64 / den
        }
    }

    pub fn iou(&self) -> f64 {
        let den = (self.tp + self.fp + self.fn_) as f64;
        if den == 0.0 {
            0.0
        } else {
            self.tp as f64 / den
        }
    }
}

/// Pooled confusion counts over paired binary masks.
pub fn confusion<P: AsRef<[u8]>, T: AsRef<[u8]>>(pred: &[P], truth: &[T]) -> Result<Confusion> {
    if pred.len() != truth.len() {
        return Err(Error::ShapeMismatch(format!("{} predictions for {} truth masks", pred.len(), truth.len())));
    }
    let mut c = Confusion::default();
    for (k, (p, t)) in pred.iter().zip(truth).enumerate() {
        let (p, t) = (p.as_ref(), t.as_ref());
        if p.len() != t.len() {
            return Err(Error::ShapeMismatch(format!(
                "mask {k}: prediction has {} pixels, truth {}",
                p.len(),
                t.len()
            )));
        }
        for (&a, &b) in p.iter().zip(t) {
            match (a != 0, b != 0) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
    }
    Ok(c)
}

pub fn f1_score<P: AsRef<[u8]>, T: AsRef<[u8]>>(pred: &[P], truth: &[T]) -> Result<f64> {
    Ok(confusion(pred, truth)?.f1())
}

pub fn iou_score<P: AsRef<[u8]>, T: AsRef<[u8]>>(pred: &[P], truth: &[T]) -> Result<f64> {
    Ok(confusion(pred, truth)?.iou())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    /// Normalised intensity inside the contour, zero outside.
    pub prob: Vec<f64>,
    /// Inside-contour pixels strictly above the `q`-quantile of inside
    /// intensities; `q = 0` keeps the whole interior.
    pub hard: Vec<u8>,
}

/// Threshold detector on a min/max-normalised image.
pub fn threshold_detector(img: &BpImage, contour: &Contour, q: f64) -> Result<Detection> {
    if !(0.0..1.0).contains(&q) {
        return Err(Error::InvalidArgument(format!("quantile {q} must lie in [0, 1)")));
    }
    let inside = interior_mask(contour, &img.geometry);
    let prob: Vec<f64> = img
        .pixels
        .iter()
        .zip(&inside)
        .map(|(&v, &m)| if m { v.clamp(0.0, 1.0) } else { 0.0 })
        .collect();
    let mut values: Vec<f64> = prob.iter().zip(&inside).filter(|(_, &m)| m).map(|(&v, _)| v).collect();
    let hard = if q == 0.0 || values.is_empty() {
        inside.iter().map(|&m| u8::from(m)).collect()
    } else {
        values.sort_unstable_by(f64::total_cmp);
        let cut = values[((q * values.len() as f64).floor() as usize).min(values.len() - 1)];
        prob.iter().zip(&inside).map(|(&v, &m)| u8::from(m && v > cut)).collect()
    };
    Ok(Detection { prob, hard })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::RasterGeometry;
    use proptest::prelude::*;

    fn pair(prob: &[f64], truth: &[u8]) -> MaskPair {
        MaskPair::new(prob.len(), 1, prob.to_vec(), truth.to_vec()).unwrap()
    }

    /// Direct confusion-matrix count at one threshold.
    fn enumerate(prob: &[f64], truth: &[u8], th: f64) -> (f64, f64) {
        let pred = binarize(prob, th);
        let c = confusion(&[pred], &[truth]).unwrap();
        (c.fp as f64 / (c.fp + c.tn) as f64, c.tp as f64 / (c.tp + c.fn_) as f64)
    }

    const HAND_P: [f64; 6] = [0.9, 0.8, 0.7, 0.4, 0.3, 0.1];
    const HAND_Y: [u8; 6] = [1, 1, 0, 1, 0, 0];

    #[test]
    fn bce_examples() {
        let y = [1u8, 0, 1, 0];
        let exact = pair(&[1.0, 0.0, 1.0, 0.0], &y);
        assert!(bce_loss(&[exact]).unwrap() <= -(1.0f64 - 1e-7).ln() + 1e-15);
        let half = pair(&[0.5; 4], &y);
        assert!((bce_loss(&[half]).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
        let wrong = pair(&[0.0, 1.0, 0.0, 1.0], &y);
        let l = bce_loss(&[wrong]).unwrap();
        assert!((l - 16.118).abs() < 1e-3, "{l}");
    }

    #[test]
    fn mask_pair_validation() {
        assert!(matches!(MaskPair::new(2, 2, vec![0.0; 3], vec![0; 4]), Err(Error::ShapeMismatch(_))));
        assert!(matches!(MaskPair::new(1, 1, vec![1.5], vec![0]), Err(Error::InvalidArgument(_))));
        assert!(matches!(MaskPair::new(1, 1, vec![f64::NAN], vec![0]), Err(Error::InvalidArgument(_))));
        assert!(matches!(MaskPair::new(1, 1, vec![0.5], vec![2]), Err(Error::InvalidArgument(_))));
        let a = pair(&[0.5; 4], &[0, 1, 0, 1]);
        let b = MaskPair::new(2, 2, vec![0.5; 4], vec![0, 1, 0, 1]).unwrap();
        assert!(matches!(bce_loss(&[a.clone(), b.clone()]), Err(Error::ShapeMismatch(_))));
        assert!(matches!(roc_curve(&[a, b]), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn hand_dataset_roc() {
        let curve = roc_curve(&[pair(&HAND_P, &HAND_Y)]).unwrap();
        let (pfa, pd) = enumerate(&HAND_P, &HAND_Y, 0.5);
        assert_eq!((pfa, pd), (1.0 / 3.0, 2.0 / 3.0));
        // The curve point reached once every score above .5 is positive.
        let at = curve.points.iter().filter(|p| p.threshold >= 0.5).last().unwrap();
        assert_eq!((at.p_fa, at.p_d), (pfa, pd));
        for p in &curve.points {
            assert_eq!(enumerate(&HAND_P, &HAND_Y, p.threshold), (p.p_fa, p.p_d));
        }
        let op = threshold_at_pfa(&curve, 0.34).unwrap();
        assert!(op.threshold > 0.3 && op.threshold <= 0.4, "{op:?}");
        assert_eq!((op.p_fa, op.p_d), (1.0 / 3.0, 1.0));
    }

    #[test]
    fn separable_and_constant_scores() {
        let sep = roc_curve(&[pair(&[0.9, 0.8, 0.2, 0.1], &[1, 1, 0, 0])]).unwrap();
        assert!(sep.points.iter().any(|p| p.p_fa == 0.0 && p.p_d == 1.0));
        assert_eq!(sep.auc(), 1.0);
        let op = threshold_at_pfa(&sep, 1e-3).unwrap();
        assert_eq!((op.p_fa, op.p_d), (0.0, 1.0));

        let flat = roc_curve(&[pair(&[0.4; 4], &[1, 0, 1, 0])]).unwrap();
        let ends: Vec<(f64, f64)> = flat.points.iter().map(|p| (p.p_fa, p.p_d)).collect();
        assert_eq!(ends, vec![(0.0, 0.0), (1.0, 1.0)]);
        assert_eq!(flat.auc(), 0.5);
    }

    #[test]
    fn endpoints_present_with_extreme_scores() {
        let c = roc_curve(&[pair(&[1.0, 0.0, 0.5], &[1, 0, 0])]).unwrap();
        let first = c.points[0];
        let last = *c.points.last().unwrap();
        assert!(first.threshold >= 1.0 && (first.p_fa, first.p_d) == (0.0, 0.0));
        assert_eq!((last.threshold, last.p_fa, last.p_d), (0.0, 1.0, 1.0));
    }

    #[test]
    fn infeasible_target_falls_back_to_zero_pfa() {
        // 100 negatives, so the smallest nonzero P_FA is 0.01.
        let mut prob = vec![0.5; 100];
        let mut truth = vec![0u8; 100];
        prob.push(0.4);
        truth.push(1);
        let c = roc_curve(&[pair(&prob, &truth)]).unwrap();
        let op = threshold_at_pfa(&c, 1e-3).unwrap();
        assert_eq!(op.p_fa, 0.0);
        assert!(matches!(threshold_at_pfa(&c, 0.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(threshold_at_pfa(&c, 1.0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn degenerate_labels() {
        assert!(matches!(roc_curve(&[pair(&[0.1, 0.2], &[0, 0])]), Err(Error::DegenerateLabels(_))));
        assert!(matches!(roc_curve(&[pair(&[0.1, 0.2], &[1, 1])]), Err(Error::DegenerateLabels(_))));
    }

    #[test]
    fn f1_iou_examples() {
        let t = vec![1u8, 1, 0, 0];
        assert_eq!(f1_score(&[&t], &[&t]).unwrap(), 1.0);
        assert_eq!(iou_score(&[&t], &[&t]).unwrap(), 1.0);
        // TP = FP = FN = 1.
        let p = [1u8, 0, 1, 0];
        assert_eq!(f1_score(&[p], &[&t]).unwrap(), 0.5);
        assert_eq!(iou_score(&[p], &[&t]).unwrap(), 1.0 / 3.0);
        let d = [0u8, 0, 1, 1];
        assert_eq!(f1_score(&[d], &[&t]).unwrap(), 0.0);
        assert_eq!(iou_score(&[[0u8; 4]], &[[0u8; 4]]).unwrap(), 0.0);
        assert!(matches!(f1_score(&[[0u8; 3]], &[[0u8; 4]]), Err(Error::ShapeMismatch(_))));
        assert!(matches!(iou_score(&[[0u8; 4]], &[[0u8; 4], [0u8; 4]]), Err(Error::ShapeMismatch(_))));
    }

    fn circle(radius: f64) -> Contour {
        let n = 64;
        let step = 2.0 * std::f64::consts::PI / n as f64;
        Contour::new((0..n).map(|k| (radius * (k as f64 * step).cos(), radius * (k as f64 * step).sin())).collect())
            .unwrap()
    }

    #[test]
    fn detector_examples() {
        let g = RasterGeometry::new(16, 16, 1.0, (-8.0, -8.0)).unwrap();
        let c = circle(5.0);
        let zero = BpImage::zeros(&g);
        let d = threshold_detector(&zero, &c, 0.5).unwrap();
        assert!(d.prob.iter().all(|&v| v == 0.0));
        assert!(d.hard.iter().all(|&v| v == 0));

        let mut img = BpImage::zeros(&g);
        img.pixels = (0..g.len()).map(|k| k as f64 / g.len() as f64).collect();
        let inside = interior_mask(&c, &g);
        let d0 = threshold_detector(&img, &c, 0.0).unwrap();
        assert_eq!(d0.hard, inside.iter().map(|&m| u8::from(m)).collect::<Vec<_>>());
        let d = threshold_detector(&img, &c, 0.75).unwrap();
        let n_in = inside.iter().filter(|&&m| m).count();
        let n_hard = d.hard.iter().filter(|&&v| v == 1).count();
        assert_eq!(n_hard, n_in - (0.75 * n_in as f64) as usize - 1);
        for k in 0..g.len() {
            assert_eq!(d.prob[k], if inside[k] { img.pixels[k] } else { 0.0 });
            assert!(d.hard[k] == 0 || inside[k]);
        }
        assert!(matches!(threshold_detector(&img, &c, 1.0), Err(Error::InvalidArgument(_))));
    }

    fn dataset() -> impl Strategy<Value = Vec<(f64, u8)>> {
        prop::collection::vec(((0u8..=20).prop_map(|k| k as f64 / 20.0), 0u8..=1), 2..80)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn iou_is_f1_over_two_minus_f1(data in prop::collection::vec((0u8..=1, 0u8..=1), 0..64)) {
            let (p, t): (Vec<u8>, Vec<u8>) = data.into_iter().unzip();
            let f1 = f1_score(&[&p], &[&t]).unwrap();
            let iou = iou_score(&[&p], &[&t]).unwrap();
            prop_assert!((iou - f1 / (2.0 - f1)).abs() <= 1e-12);
            prop_assert!((0.0..=1.0).contains(&f1) && (0.0..=1.0).contains(&iou));
        }
    }

    proptest! {
        #[test]
        fn roc_matches_enumeration_and_is_monotone(data in dataset()) {
            let (p, t): (Vec<f64>, Vec<u8>) = data.into_iter().unzip();
            prop_assume!(t.contains(&0) && t.contains(&1));
            let c = roc_curve(&[pair(&p, &t)]).unwrap();
            prop_assert_eq!((c.points[0].p_fa, c.points[0].p_d), (0.0, 0.0));
            let last = c.points.last().unwrap();
            prop_assert_eq!((last.threshold, last.p_fa, last.p_d), (0.0, 1.0, 1.0));
            for w in c.points.windows(2) {
                prop_assert!(w[1].threshold < w[0].threshold);
                prop_assert!(w[1].p_fa >= w[0].p_fa && w[1].p_d >= w[0].p_d);
            }
            for pt in &c.points[1..] {
                prop_assert_eq!(enumerate(&p, &t, pt.threshold), (pt.p_fa, pt.p_d));
            }
            let auc = c.auc();
            prop_assert!((0.0..=1.0).contains(&auc));
        }

        #[test]
        fn operating_point_respects_target(data in dataset(), target in 1e-4f64..0.999) {
            let (p, t): (Vec<f64>, Vec<u8>) = data.into_iter().unzip();
            prop_assume!(t.contains(&0) && t.contains(&1));
            let c = roc_curve(&[pair(&p, &t)]).unwrap();
            let op = threshold_at_pfa(&c, target).unwrap();
            prop_assert!(op.p_fa <= target);
            // No feasible point detects more.
            prop_assert!(c.points.iter().filter(|q| q.p_fa <= target).all(|q| q.p_d <= op.p_d));
        }

        #[test]
        fn metrics_ignore_pixel_order(data in dataset(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let (p, t): (Vec<f64>, Vec<u8>) = data.into_iter().unzip();
            let mut idx: Vec<usize> = (0..p.len()).collect();
            idx.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let ps: Vec<f64> = idx.iter().map(|&k| p[k]).collect();
            let ts: Vec<u8> = idx.iter().map(|&k| t[k]).collect();
            let hard = binarize(&p, 0.5);
            let hard_s = binarize(&ps, 0.5);
            prop_assert_eq!(f1_score(&[&hard], &[&t]).unwrap(), f1_score(&[&hard_s], &[&ts]).unwrap());
            prop_assert_eq!(iou_score(&[&hard], &[&t]).unwrap(), iou_score(&[&hard_s], &[&ts]).unwrap());
            let a = bce_loss(&[pair(&p, &t)]).unwrap();
            let b = bce_loss(&[pair(&ps, &ts)]).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
            if t.contains(&0) && t.contains(&1) {
                prop_assert_eq!(roc_curve(&[pair(&p, &t)]).unwrap(), roc_curve(&[pair(&ps, &ts)]).unwrap());
            }
        }
    }
}
