use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::ad::Tensor;
use crate::error::{Error, Result};
use crate::rng::rng_from;

/// How the two modalities become an expert input.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModalityPath {
    /// Text vector only.
    T1 = 0,
    /// Textualized numeric vector concatenated with the text vector.
    T2 = 1,
    /// Numeric vector only.
    N1 = 2,
    /// Embedded text vector concatenated with the numeric vector.
    N2 = 3,
}

impl ModalityPath {
    pub const ALL: [ModalityPath; 4] = [ModalityPath::T1, ModalityPath::T2, ModalityPath::N1, ModalityPath::N2];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn is_fused(self) -> bool {
        matches!(self, ModalityPath::T2 | ModalityPath::N2)
    }
}

impl fmt::Display for ModalityPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModalityPath::T1 => "T1",
            ModalityPath::T2 => "T2",
            ModalityPath::N1 => "N1",
            ModalityPath::N2 => "N2",
        })
    }
}

impl FromStr for ModalityPath {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "T1" => Ok(ModalityPath::T1),
            "T2" => Ok(ModalityPath::T2),
            "N1" => Ok(ModalityPath::N1),
            "N2" => Ok(ModalityPath::N2),
            other => Err(Error::Config(format!("unknown modality path {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskParadigm {
    /// Two disjoint per-task networks.
    Stl = 0,
    /// Shared encoder with two task heads.
    Mtl = 1,
}

impl TaskParadigm {
    pub const ALL: [TaskParadigm; 2] = [TaskParadigm::Stl, TaskParadigm::Mtl];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for TaskParadigm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskParadigm::Stl => "STL",
            TaskParadigm::Mtl => "MTL",
        })
    }
}

impl FromStr for TaskParadigm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "STL" => Ok(TaskParadigm::Stl),
            "MTL" => Ok(TaskParadigm::Mtl),
            other => Err(Error::Config(format!("unknown task paradigm {other:?}"))),
        }
    }
}

/// One (modality path, task paradigm) expert slot. Slots are numbered
/// `2·path + paradigm`, i.e. T1/STL, T1/MTL, T2/STL, …, N2/MTL.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Slot {
    pub path: ModalityPath,
    pub paradigm: TaskParadigm,
}

pub const NUM_SLOTS: usize = 8;

impl Slot {
    pub fn new(path: ModalityPath, paradigm: TaskParadigm) -> Self {
        Slot { path, paradigm }
    }

    pub fn all() -> [Slot; NUM_SLOTS] {
        std::array::from_fn(|i| Slot::from_index(i).expect("index below NUM_SLOTS"))
    }

    pub fn index(self) -> usize {
        2 * self.path.index() + self.paradigm.index()
    }

    pub fn from_index(i: usize) -> Option<Self> {
        let path = ModalityPath::from_index(i / 2)?;
        let paradigm = if i % 2 == 0 { TaskParadigm::Stl } else { TaskParadigm::Mtl };
        Some(Slot { path, paradigm })
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.path, self.paradigm)
    }
}

impl FromStr for Slot {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (p, q) =
            s.split_once(['-', '/']).ok_or_else(|| Error::Config(format!("slot {s:?} must look like T2-MTL")))?;
        Ok(Slot::new(p.parse()?, q.parse()?))
    }
}

/// Frozen cross-modal surrogate maps.
///
/// `num_to_text` (d_text×d_num) stands in for textualizing numeric features,
/// `text_to_num` (d_num×d_text) for embedding text. Entries are standard
/// normal scaled by `1/√d_in`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModalityTransforms {
    pub d_num: usize,
    pub d_text: usize,
    pub num_to_text: Tensor,
    pub text_to_num: Tensor,
}

impl ModalityTransforms {
    pub fn sample(d_num: usize, d_text: usize, seed: u64) -> Self {
        let mut rng = rng_from(seed, &[0x7a45]);
        let mut gaussian = |rows: usize, cols: usize| {
            let scale = 1.0 / (cols as f64).sqrt();
            let values = (0..rows * cols)
                .map(|_| {
                    scale * {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        z
                    }
                })
                .collect();
            Tensor::from_parts(vec![rows, cols], values)
        };
        let num_to_text = gaussian(d_text, d_num);
        let text_to_num = gaussian(d_num, d_text);
        ModalityTransforms { d_num, d_text, num_to_text, text_to_num }
    }

    /// Width of `X^(i)` for a path; defined for every path and dimension pair.
    pub fn input_dim(&self, path: ModalityPath) -> usize {
        match path {
            ModalityPath::T1 => self.d_text,
            ModalityPath::N1 => self.d_num,
            ModalityPath::T2 => 2 * self.d_text,
            ModalityPath::N2 => 2 * self.d_num,
        }
    }

    /// Applies a path to a batch: `x_num` is n×d_num, `x_text` is n×d_text.
    pub fn apply(&self, path: ModalityPath, x_num: &Tensor, x_text: &Tensor) -> Result<Tensor> {
        let n = x_num.rows();
        if x_num.cols() != self.d_num || x_text.cols() != self.d_text || x_text.rows() != n {
            return Err(Error::Shape(format!(
                "modality inputs {:?} and {:?} do not match dims ({}, {})",
                x_num.shape(),
                x_text.shape(),
                self.d_num,
                self.d_text
            )));
        }
        let rows: Vec<Vec<f64>> = (0..n).map(|r| self.apply_row(path, x_num.row(r), x_text.row(r))).collect();
        Tensor::new(vec![n, self.input_dim(path)], rows.concat())
    }

    pub fn apply_sample(&self, path: ModalityPath, x_num: &[f64], x_text: &[f64]) -> Result<Vec<f64>> {
        if x_num.len() != self.d_num || x_text.len() != self.d_text {
            return Err(Error::Shape(format!(
                "modality inputs ({}, {}) do not match dims ({}, {})",
                x_num.len(),
                x_text.len(),
                self.d_num,
                self.d_text
            )));
        }
        Ok(self.apply_row(path, x_num, x_text))
    }

    fn apply_row(&self, path: ModalityPath, x_num: &[f64], x_text: &[f64]) -> Vec<f64> {
        match path {
            ModalityPath::T1 => x_text.to_vec(),
            ModalityPath::N1 => x_num.to_vec(),
            ModalityPath::T2 => {
                let mut out = mat_vec(&self.num_to_text, x_num);
                out.extend_from_slice(x_text);
                out
            }
            ModalityPath::N2 => {
                let mut out = mat_vec(&self.text_to_num, x_text);
                out.extend_from_slice(x_num);
                out
            }
        }
    }
}

fn mat_vec(m: &Tensor, x: &[f64]) -> Vec<f64> {
    (0..m.rows()).map(|r| m.row(r).iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slot_indexing_is_path_major() {
        let names: Vec<String> = Slot::all().iter().map(Slot::to_string).collect();
        assert_eq!(names, ["T1-STL", "T1-MTL", "T2-STL", "T2-MTL", "N1-STL", "N1-MTL", "N2-STL", "N2-MTL"]);
        for (i, s) in Slot::all().iter().enumerate() {
            assert_eq!(s.index(), i);
            assert_eq!(s.to_string().parse::<Slot>().unwrap(), *s);
        }
        assert!(Slot::from_index(8).is_none());
    }

    #[test]
    fn t1_passes_text_through() {
        let tr = ModalityTransforms::sample(3, 2, 0);
        let out = tr.apply_sample(ModalityPath::T1, &[1.0, 2.0, 3.0], &[4.0, 5.0]).unwrap();
        assert_eq!(out, vec![4.0, 5.0]);
    }

    #[test]
    fn n2_of_zero_text_is_zero_then_numeric() {
        let tr = ModalityTransforms::sample(3, 2, 0);
        let out = tr.apply_sample(ModalityPath::N2, &[1.0, 2.0, 3.0], &[0.0, 0.0]).unwrap();
        assert_eq!(out, vec![0.0, 0.0, 0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn path_dims_for_defaults() {
        let tr = ModalityTransforms::sample(16, 16, 0);
        assert_eq!(tr.input_dim(ModalityPath::T2), 32);
        assert_eq!(tr.input_dim(ModalityPath::N2), 32);
        assert_eq!(tr.input_dim(ModalityPath::T1), 16);
        let tr = ModalityTransforms::sample(5, 7, 0);
        for p in ModalityPath::ALL {
            let out = tr.apply_sample(p, &[0.5; 5], &[0.25; 7]).unwrap();
            assert_eq!(out.len(), tr.input_dim(p));
        }
    }

    #[test]
    fn batch_and_sample_agree() {
        let tr = ModalityTransforms::sample(3, 2, 4);
        let xn = Tensor::matrix(2, 3, vec![0.1, 0.2, 0.3, -1.0, 0.0, 2.0]).unwrap();
        let xt = Tensor::matrix(2, 2, vec![0.5, 0.6, 0.7, -0.8]).unwrap();
        let batch = tr.apply(ModalityPath::T2, &xn, &xt).unwrap();
        assert_eq!(batch.row(1), tr.apply_sample(ModalityPath::T2, xn.row(1), xt.row(1)).unwrap().as_slice());
        assert!(tr.apply(ModalityPath::T2, &xt, &xn).is_err());
    }
}
