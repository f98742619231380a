use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::scenario::{split_seed, ScenarioSpec};
use crate::ad::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train = 0,
    Test = 1,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub x_num: Vec<f64>,
    pub x_text: Vec<f64>,
    pub y1: f64,
    pub y2: f64,
}

impl Sample {
    /// A modality counts as unavailable when its vector is all zeros.
    pub fn num_available(&self) -> bool {
        self.x_num.iter().any(|v| *v != 0.0)
    }

    pub fn text_available(&self) -> bool {
        self.x_text.iter().any(|v| *v != 0.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    split: Split,
    d_num: usize,
    d_text: usize,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>, split: Split) -> Result<Self> {
        let first =
            samples.first().ok_or_else(|| Error::Contract("dataset must contain at least one sample".into()))?;
        let (d_num, d_text) = (first.x_num.len(), first.x_text.len());
        for (i, s) in samples.iter().enumerate() {
            if s.x_num.len() != d_num || s.x_text.len() != d_text {
                return Err(Error::Shape(format!("sample {i} has inconsistent modality dims")));
            }
            let finite = s.x_num.iter().chain(&s.x_text).chain([&s.y1, &s.y2]).all(|v| v.is_finite());
            if !finite {
                return Err(Error::Numeric(format!("sample {i} contains non-finite values")));
            }
        }
        Ok(Dataset { samples, split, d_num, d_text })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn d_num(&self) -> usize {
        self.d_num
    }

    pub fn d_text(&self) -> usize {
        self.d_text
    }

    /// New dataset holding the samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        Dataset::new(indices.iter().map(|&i| self.samples[i].clone()).collect(), self.split)
    }

    pub fn x_num(&self, indices: &[usize]) -> Tensor {
        gather(indices, self.d_num, |i| &self.samples[i].x_num)
    }

    pub fn x_text(&self, indices: &[usize]) -> Tensor {
        gather(indices, self.d_text, |i| &self.samples[i].x_text)
    }

    /// Availability bits (numeric, text) per sample, n×2.
    pub fn availability(&self, indices: &[usize]) -> Tensor {
        let values = indices
            .iter()
            .flat_map(|&i| {
                let s = &self.samples[i];
                [f64::from(u8::from(s.num_available())), f64::from(u8::from(s.text_available()))]
            })
            .collect();
        Tensor::from_parts(vec![indices.len(), 2], values)
    }

    pub fn targets(&self) -> (Vec<f64>, Vec<f64>) {
        self.samples.iter().map(|s| (s.y1, s.y2)).unzip()
    }

    /// SHA-256 over the bit patterns of every stored value.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.d_num as u64).to_le_bytes());
        h.update((self.d_text as u64).to_le_bytes());
        for s in &self.samples {
            for v in s.x_num.iter().chain(&s.x_text).chain([&s.y1, &s.y2]) {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    pub fn header(d_num: usize, d_text: usize) -> Vec<String> {
        (0..d_num)
            .map(|i| format!("x_num_{i}"))
            .chain((0..d_text).map(|i| format!("x_text_{i}")))
            .chain(["y1".to_string(), "y2".to_string()])
            .collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e))?;
        w.write_record(Self::header(self.d_num, self.d_text)).map_err(|e| Error::format(path, e))?;
        for s in &self.samples {
            let row: Vec<String> =
                s.x_num.iter().chain(&s.x_text).chain([&s.y1, &s.y2]).map(|v| v.to_string()).collect();
            w.write_record(&row).map_err(|e| Error::format(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path, split: Split) -> Result<Dataset> {
        let mut r = csv::Reader::from_path(path).map_err(|e| Error::format(path, e))?;
        let headers = r.headers().map_err(|e| Error::format(path, e))?.clone();
        let d_num = headers.iter().filter(|h| h.starts_with("x_num_")).count();
        let d_text = headers.iter().filter(|h| h.starts_with("x_text_")).count();
        let expected = Self::header(d_num, d_text);
        if headers.iter().ne(expected.iter().map(String::as_str)) {
            return Err(Error::format(path, "unexpected header layout"));
        }
        let mut samples = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| Error::format(path, e))?;
            let vals = rec
                .iter()
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::format(path, format!("row {}: {e}", line + 1)))?;
            samples.push(Sample {
                x_num: vals[..d_num].to_vec(),
                x_text: vals[d_num..d_num + d_text].to_vec(),
                y1: vals[d_num + d_text],
                y2: vals[d_num + d_text + 1],
            });
        }
        Dataset::new(samples, split).map_err(|e| Error::format(path, e))
    }
}

fn gather<'a>(indices: &[usize], width: usize, get: impl Fn(usize) -> &'a Vec<f64>) -> Tensor {
    let mut values = Vec::with_capacity(indices.len() * width);
    for &i in indices {
        values.extend_from_slice(get(i));
    }
    Tensor::from_parts(vec![indices.len(), width], values)
}

pub const SIDECAR_VERSION: u32 = 1;

/// `spec.json`: everything needed to regenerate `train.csv` and `test.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub version: u32,
    pub spec: ScenarioSpec,
    pub n_train: usize,
    pub n_test: usize,
    pub train_seed: u64,
    pub test_seed: u64,
    pub train_hash: String,
    pub test_hash: String,
}

impl Sidecar {
    /// Regenerates both splits from the stored coefficients and seeds.
    pub fn replay(&self) -> Result<(Dataset, Dataset)> {
        let train = self.spec.generate(self.n_train, self.train_seed, Split::Train)?;
        let test = self.spec.generate(self.n_test, self.test_seed, Split::Test)?;
        Ok((train, test))
    }
}

/// Writes `train.csv`, `test.csv` and `spec.json` into `dir`.
pub fn write_benchmark(dir: &Path, spec: &ScenarioSpec, train: &Dataset, test: &Dataset) -> Result<Sidecar> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    train.write_csv(&dir.join("train.csv"))?;
    test.write_csv(&dir.join("test.csv"))?;
    let sidecar = Sidecar {
        version: SIDECAR_VERSION,
        spec: spec.clone(),
        n_train: train.len(),
        n_test: test.len(),
        train_seed: split_seed(spec.seed, Split::Train),
        test_seed: split_seed(spec.seed, Split::Test),
        train_hash: train.content_hash(),
        test_hash: test.content_hash(),
    };
    let path = dir.join("spec.json");
    let text = serde_json::to_string_pretty(&sidecar).map_err(|e| Error::format(&path, e))?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(sidecar)
}

/// Generates a scenario trial and writes it to `dir`.
pub fn generate_benchmark(dir: &Path, spec: &ScenarioSpec, n_train: usize, n_test: usize) -> Result<Sidecar> {
    let (train, test) = spec.generate_split(n_train, n_test)?;
    write_benchmark(dir, spec, &train, &test)
}

pub fn read_sidecar(dir: &Path) -> Result<Sidecar> {
    let path = dir.join("spec.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let sidecar: Sidecar = serde_json::from_str(&text).map_err(|e| Error::format(&path, e))?;
    if sidecar.version != SIDECAR_VERSION {
        return Err(Error::format(&path, format!("unsupported version {}", sidecar.version)));
    }
    Ok(sidecar)
}

/// Reads `train.csv` and `test.csv` from a benchmark directory.
pub fn read_benchmark(dir: &Path) -> Result<(Dataset, Dataset)> {
    let train = Dataset::read_csv(&dir.join("train.csv"), Split::Train)?;
    let test = Dataset::read_csv(&dir.join("test.csv"), Split::Test)?;
    Ok((train, test))
}
