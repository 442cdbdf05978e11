use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AffineTransform, BenchmarkDensity, DensityError, MixtureOfGaussians};

/// On-disk form of a density: a JSON document whose numbers carry 17
/// significant digits, enough to reproduce every `f64` bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityFile {
    pub name: String,
    pub dim: usize,
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub chol_factors: Vec<Vec<Vec<f64>>>,
    pub scale: Vec<f64>,
    pub shift: Vec<f64>,
}

impl DensityFile {
    pub fn from_density(d: &BenchmarkDensity) -> Self {
        let core = d.core();
        Self {
            name: d.name().to_string(),
            dim: d.dim(),
            weights: core.weights().to_vec(),
            means: core.means().to_vec(),
            chol_factors: (0..core.n_components()).map(|c| core.chol_factor(c)).collect(),
            scale: d.destandardize().scale().to_vec(),
            shift: d.destandardize().shift().to_vec(),
        }
    }

    pub fn into_density(self) -> Result<BenchmarkDensity, DensityError> {
        let core = MixtureOfGaussians::new(self.weights, self.means, self.chol_factors)?;
        if core.dim() != self.dim {
            return Err(DensityError::Invalid(format!(
                "declared dim {} but means have dimension {}",
                self.dim,
                core.dim()
            )));
        }
        BenchmarkDensity::new(self.name, core, AffineTransform::new(self.scale, self.shift)?)
    }

    pub fn to_json(&self) -> Vec<u8> {
        to_json_17(self)
    }
}

/// JSON formatter that prints every float in scientific notation with 17
/// significant digits.
pub(crate) struct SeventeenDigits;

impl serde_json::ser::Formatter for SeventeenDigits {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }
}

pub(crate) fn to_json_17<T: Serialize>(value: &T) -> Vec<u8> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SeventeenDigits);
    value.serialize(&mut ser).expect("in-memory serialization cannot fail");
    buf.push(b'\n');
    buf
}

pub fn save_density(density: &BenchmarkDensity, path: impl AsRef<Path>) -> Result<(), DensityError> {
    let path = path.as_ref();
    let io_err = |source| DensityError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    w.write_all(&DensityFile::from_density(density).to_json()).map_err(io_err)?;
    w.flush().map_err(io_err)
}

pub fn load_density(path: impl AsRef<Path>) -> Result<BenchmarkDensity, DensityError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| DensityError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let parsed: DensityFile = serde_json::from_reader(BufReader::new(file)).map_err(|source| DensityError::Parse {
        path: path.display().to_string(),
        source,
    })?;
    parsed.into_density()
}
