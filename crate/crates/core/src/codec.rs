//! Signed fixed-point bit encoding of real vectors.
//!
//! Each variable occupies `1 + int_bits + frac_bits` bits: a sign bit (1 for
//! negative), the integer part big-endian, then the binary fraction. Values
//! are clamped to the per-variable bounds before encoding and any residue
//! below the grid resolution `2^-frac_bits` is truncated toward zero.

use rand::Rng;

#[derive(Debug)]
pub enum CodecError {
    BadLayout(String),
    BadBounds { var: usize, message: String },
}

impl std::fmt::Display for CodecError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CodecError::BadLayout(m) => write!(f, "bad codec layout: {m}"),
            CodecError::BadBounds { var, message } => write!(f, "bad bounds for variable {var}: {message}"),
        }
    }
}

impl std::error::Error for CodecError {}

/// Fixed-length bit string describing one candidate solution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chromosome {
    pub bits: Vec<bool>,
}

impl Chromosome {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

/// Bit layout and clamp bounds for a vector of `n_vars` fixed-point values.
#[derive(Debug, Clone)]
pub struct Codec {
    n_vars: usize,
    int_bits: usize,
    frac_bits: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Codec {
    pub fn new(
        int_bits: usize,
        frac_bits: usize,
        lower: Vec<f64>,
        upper: Vec<f64>,
    ) -> Result<Self, CodecError> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(CodecError::BadLayout(format!(
                "bounds have lengths {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        if int_bits < 1 {
            return Err(CodecError::BadLayout("int_bits must be at least 1".into()));
        }
        if int_bits + frac_bits > 52 {
            return Err(CodecError::BadLayout(
                "int_bits + frac_bits must not exceed 52 for an exact f64 grid".into(),
            ));
        }
        let limit = (1u64 << int_bits) as f64;
        for (i, (&lo, &hi)) in lower.iter().zip(&upper).enumerate() {
            if lo.is_nan() || hi.is_nan() || lo > hi {
                return Err(CodecError::BadBounds {
                    var: i,
                    message: format!("lower {lo} exceeds upper {hi}"),
                });
            }
            if lo.abs() >= limit || hi.abs() >= limit {
                return Err(CodecError::BadBounds {
                    var: i,
                    message: format!("bounds must have magnitude below 2^{int_bits}"),
                });
            }
        }
        Ok(Codec {
            n_vars: lower.len(),
            int_bits,
            frac_bits,
            lower,
            upper,
        })
    }

    /// Same bounds for every variable.
    pub fn uniform(
        n_vars: usize,
        int_bits: usize,
        frac_bits: usize,
        lower: f64,
        upper: f64,
    ) -> Result<Self, CodecError> {
        Codec::new(int_bits, frac_bits, vec![lower; n_vars], vec![upper; n_vars])
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn int_bits(&self) -> usize {
        self.int_bits
    }

    pub fn frac_bits(&self) -> usize {
        self.frac_bits
    }

    /// Bits per variable, including the sign bit.
    pub fn var_bits(&self) -> usize {
        self.int_bits + self.frac_bits + 1
    }

    pub fn total_bits(&self) -> usize {
        self.n_vars * self.var_bits()
    }

    pub fn bounds(&self, var: usize) -> (f64, f64) {
        (self.lower[var], self.upper[var])
    }

    /// Encode a real vector, clamping each value to its bounds and truncating
    /// to the fixed-point grid.
    pub fn encode(&self, x: &[f64]) -> Chromosome {
        assert_eq!(x.len(), self.n_vars, "vector length must match the codec");
        let mut bits = Vec::with_capacity(self.total_bits());
        let scale = (1u64 << self.frac_bits) as f64;
        for (i, &raw) in x.iter().enumerate() {
            let v = raw.clamp(self.lower[i], self.upper[i]);
            let negative = v < 0.0;
            let magnitude = v.abs();
            let max_code = (1u64 << (self.int_bits + self.frac_bits)) - 1;
            let code = ((magnitude * scale).floor() as u64).min(max_code);
            bits.push(negative);
            for b in (0..self.int_bits).rev() {
                bits.push((code >> (self.frac_bits + b)) & 1 == 1);
            }
            for b in (0..self.frac_bits).rev() {
                bits.push((code >> b) & 1 == 1);
            }
        }
        Chromosome { bits }
    }

    /// Exact inverse of [`encode`](Codec::encode) on grid values. A negative
    /// zero pattern decodes to canonical `0.0`.
    pub fn decode(&self, c: &Chromosome) -> Vec<f64> {
        assert_eq!(c.len(), self.total_bits(), "chromosome length must match the codec");
        let scale = (1u64 << self.frac_bits) as f64;
        let per = self.var_bits();
        (0..self.n_vars)
            .map(|i| {
                let base = i * per;
                let negative = c.bits[base];
                let mut code = 0u64;
                for b in 0..self.int_bits + self.frac_bits {
                    code = (code << 1) | u64::from(c.bits[base + 1 + b]);
                }
                let v = code as f64 / scale;
                if v == 0.0 {
                    0.0
                } else if negative {
                    -v
                } else {
                    v
                }
            })
            .collect()
    }

    /// Uniform draw from the bound box, one value per variable.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.n_vars)
            .map(|i| {
                let (lo, hi) = (self.lower[i], self.upper[i]);
                lo + (hi - lo) * rng.random::<f64>()
            })
            .collect()
    }

    /// Uniformly random chromosome bits.
    pub fn random_chromosome<R: Rng + ?Sized>(&self, rng: &mut R) -> Chromosome {
        Chromosome {
            bits: (0..self.total_bits()).map(|_| rng.random::<bool>()).collect(),
        }
    }
}
