//! Moving-class confusion counts and IoU.

use std::fmt;
use std::ops::{Add, AddAssign};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Counts one scan's binary predictions against ground truth.
    pub fn accumulate(mut self, pred: &[u8], gt: &[u8]) -> Result<Self> {
        if pred.len() != gt.len() {
            return Err(Error::contract(format!(
                "{} predictions for {} ground-truth labels",
                pred.len(),
                gt.len()
            )));
        }
        for (&p, &g) in pred.iter().zip(gt) {
            match (p != 0, g != 0) {
                (true, true) => self.tp += 1,
                (true, false) => self.fp += 1,
                (false, true) => self.fn_ += 1,
                (false, false) => self.tn += 1,
            }
        }
        Ok(self)
    }

    /// `tp / (tp + fp + fn)`, or `None` when no point is moving in either
    /// prediction or ground truth.
    pub fn iou_moving(&self) -> Option<f64> {
        let denom = self.tp + self.fp + self.fn_;
        (denom > 0).then(|| self.tp as f64 / denom as f64)
    }

    /// Swaps the roles of prediction and ground truth.
    pub fn transposed(&self) -> Self {
        Self {
            fp: self.fn_,
            fn_: self.fp,
            ..*self
        }
    }
}

pub fn accumulate(pred: &[u8], gt: &[u8], cm: ConfusionMatrix) -> Result<ConfusionMatrix> {
    cm.accumulate(pred, gt)
}

pub fn iou_moving(cm: &ConfusionMatrix) -> Option<f64> {
    cm.iou_moving()
}

impl Add for ConfusionMatrix {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
            tn: self.tn + o.tn,
        }
    }
}

impl AddAssign for ConfusionMatrix {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl std::iter::Sum for ConfusionMatrix {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), Add::add)
    }
}

/// Per-scan and overall results for one sequence.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SequenceReport {
    pub name: String,
    pub scans: Vec<(String, ConfusionMatrix)>,
}

impl SequenceReport {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            scans: Vec::new(),
        }
    }

    pub fn push(&mut self, scan: impl Into<String>, cm: ConfusionMatrix) {
        self.scans.push((scan.into(), cm));
    }

    pub fn overall(&self) -> ConfusionMatrix {
        self.scans.iter().map(|(_, cm)| *cm).sum()
    }

    /// Scans whose IoU is undefined.
    pub fn undefined_scans(&self) -> usize {
        self.scans
            .iter()
            .filter(|(_, cm)| cm.iou_moving().is_none())
            .count()
    }

    /// Line-delimited `key=value` form.
    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        let mut line = |prefix: &str, cm: &ConfusionMatrix| {
            out.push_str(&format!(
                "{prefix}.tp={}\n{prefix}.fp={}\n{prefix}.fn={}\n{prefix}.tn={}\n{prefix}.iou_moving={}\n",
                cm.tp,
                cm.fp,
                cm.fn_,
                cm.tn,
                fmt_iou(cm.iou_moving())
            ));
        };
        for (scan, cm) in &self.scans {
            line(&format!("scan.{scan}"), cm);
        }
        line("overall", &self.overall());
        out.push_str(&format!("overall.scans={}\n", self.scans.len()));
        out.push_str(&format!(
            "overall.undefined_scans={}\n",
            self.undefined_scans()
        ));
        out.push_str(&format!(
            "iou_moving={}\n",
            fmt_iou(self.overall().iou_moving())
        ));
        out
    }
}

fn fmt_iou(iou: Option<f64>) -> String {
    iou.map_or_else(|| "undefined".to_string(), |v| format!("{v:.6}"))
}

impl fmt::Display for SequenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "sequence {}", self.name)?;
        writeln!(
            f,
            "{:>12} {:>10} {:>10} {:>10} {:>12} {:>10}",
            "scan", "tp", "fp", "fn", "tn", "iou"
        )?;
        for (scan, cm) in &self.scans {
            writeln!(
                f,
                "{:>12} {:>10} {:>10} {:>10} {:>12} {:>10}",
                scan,
                cm.tp,
                cm.fp,
                cm.fn_,
                cm.tn,
                fmt_iou(cm.iou_moving())
            )?;
        }
        let all = self.overall();
        writeln!(
            f,
            "{:>12} {:>10} {:>10} {:>10} {:>12} {:>10}",
            "overall",
            all.tp,
            all.fp,
            all.fn_,
            all.tn,
            fmt_iou(all.iou_moving())
        )?;
        write!(
            f,
            "moving IoU {} over {} scans ({} with undefined IoU)",
            fmt_iou(all.iou_moving()),
            self.scans.len(),
            self.undefined_scans()
        )
    }
}
