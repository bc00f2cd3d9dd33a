//! Cell-wise accuracy of a classified map against ground truth.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::grid::{export_map, CellClass, ClassMap, GridMap, GridParams};

/// Confusion counts with Safe as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EvalReport {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl EvalReport {
    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// (TP + TN) / all; 0 when nothing was compared.
    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            n => (self.tp + self.tn) as f64 / n as f64,
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# positive class: Safe; Unknown counts as predicted Unsafe\n");
        let _ = writeln!(s, "tp={}", self.tp);
        let _ = writeln!(s, "tn={}", self.tn);
        let _ = writeln!(s, "fp={}", self.fp);
        let _ = writeln!(s, "fn={}", self.fn_);
        let _ = writeln!(s, "acc={:.6}", self.accuracy());
        s
    }
}

/// Compares every observed cell of `pred` whose centre falls inside `truth`.
pub fn evaluate_class_map(pred: &ClassMap, truth: &ClassMap) -> Result<EvalReport> {
    let bbox = |m: &ClassMap| {
        [
            m.origin[0],
            m.origin[1],
            m.origin[0] + m.width as f64 * m.resolution,
            m.origin[1] + m.height as f64 * m.resolution,
        ]
    };
    let (a, b) = (bbox(pred), bbox(truth));
    if !(a[0] < b[2] && b[0] < a[2] && a[1] < b[3] && b[1] < a[3]) {
        return Err(Error::invalid("map and ground truth do not overlap"));
    }
    let mut rep = EvalReport::default();
    for r in 0..pred.height {
        for c in 0..pred.width {
            if !pred.observed[r * pred.width + c] {
                continue;
            }
            let [x, y] = pred.cell_center(c, r);
            let Some((tc, tr)) = truth.locate(x, y) else {
                continue;
            };
            let predicted_safe = pred.class(c, r) == CellClass::Safe;
            let truly_safe = truth.class(tc, tr) == CellClass::Safe;
            match (predicted_safe, truly_safe) {
                (true, true) => rep.tp += 1,
                (false, false) => rep.tn += 1,
                (true, false) => rep.fp += 1,
                (false, true) => rep.fn_ += 1,
            }
        }
    }
    Ok(rep)
}

pub fn evaluate_map(grid: &GridMap, truth: &ClassMap, params: &GridParams) -> Result<EvalReport> {
    evaluate_class_map(&export_map(grid, params), truth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn map(width: usize, height: usize, classes: Vec<CellClass>) -> ClassMap {
        ClassMap {
            width,
            height,
            origin: [0.0, 0.0],
            resolution: 0.1,
            classes,
            observed: vec![true; width * height],
        }
    }

    use CellClass::{Safe as S, Unknown as K};
    const H: CellClass = CellClass::Unsafe;

    #[test]
    fn perfect_agreement() {
        let m = map(5, 2, vec![S, S, S, S, S, H, H, H, H, H]);
        let rep = evaluate_class_map(&m, &m).unwrap();
        assert_eq!((rep.tp, rep.tn, rep.fp, rep.fn_), (5, 5, 0, 0));
        assert_eq!(rep.accuracy(), 1.0);
    }

    #[test]
    fn mixed_counts() {
        let pred = map(10, 1, vec![S, S, S, H, H, H, H, S, S, K]);
        let truth = map(10, 1, vec![S, S, S, H, H, H, H, H, H, S]);
        let rep = evaluate_class_map(&pred, &truth).unwrap();
        assert_eq!((rep.tp, rep.tn, rep.fp, rep.fn_), (3, 4, 2, 1));
        assert!((rep.accuracy() - 0.7).abs() < 1e-12);
        assert!(rep.to_text().ends_with("fn=1\nacc=0.700000\n"));
    }

    #[test]
    fn unknown_counts_as_unsafe() {
        let rep = evaluate_class_map(&map(4, 4, vec![K; 16]), &map(4, 4, vec![S; 16])).unwrap();
        assert_eq!(rep.accuracy(), 0.0);
        assert_eq!(rep.fn_, 16);
    }

    #[test]
    fn unobserved_and_outside_cells_are_skipped() {
        let mut pred = map(4, 1, vec![S, S, S, S]);
        pred.observed[0] = false;
        pred.origin = [0.2, 0.0];
        // truth covers x in [0, 0.4): only pred columns 0 and 1 fall inside, and 0 is unobserved
        let truth = map(4, 1, vec![S, S, S, H]);
        let rep = evaluate_class_map(&pred, &truth).unwrap();
        assert_eq!(rep.total(), 1);
        assert_eq!(rep.fp, 1);
    }

    #[test]
    fn disjoint_extents_fail() {
        let a = map(3, 3, vec![S; 9]);
        let mut b = a.clone();
        b.origin = [10.0, 10.0];
        assert!(matches!(
            evaluate_class_map(&a, &b),
            Err(Error::InvalidArgument(_))
        ));
    }

    proptest! {
        #[test]
        fn swapping_roles_swaps_errors(cells in prop::collection::vec((any::<bool>(), any::<bool>()), 1..100)) {
            let n = cells.len();
            let cls = |b: bool| if b { S } else { H };
            let a = map(n, 1, cells.iter().map(|c| cls(c.0)).collect());
            let b = map(n, 1, cells.iter().map(|c| cls(c.1)).collect());
            let ab = evaluate_class_map(&a, &b).unwrap();
            let ba = evaluate_class_map(&b, &a).unwrap();
            prop_assert_eq!((ab.tp, ab.tn, ab.fp, ab.fn_), (ba.tp, ba.tn, ba.fn_, ba.fp));
            prop_assert_eq!(ab.accuracy(), ba.accuracy());
        }
    }
}
