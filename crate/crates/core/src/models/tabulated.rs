use std::path::Path;

use num_complex::Complex64;

use super::{check_gamma, GeneratorModel};
use crate::error::{Error, Result};
use crate::operator::{check_skew_hermitian, CMatrix};

/// Model defined by drift and drive samples on a time grid, interpolated
/// entry-wise with natural cubic splines.
///
/// File format: blank lines and `#` comments are ignored; a header line
/// `dim = N` precedes the samples; each sample line holds `t` followed by
/// `2N²` reals for `B̄(t)` and `2N²` reals for `C̄(t)` (row-major entries,
/// each as a `re im` pair).
///
/// Since interpolation is linear in the samples, skew-Hermitian samples give
/// skew-Hermitian interpolants.
#[derive(Debug, Clone)]
pub struct TabulatedModel {
    dim: usize,
    gamma: f64,
    times: Vec<f64>,
    drift: Spline,
    drive: Spline,
}

impl TabulatedModel {
    pub fn from_path(path: impl AsRef<Path>, gamma: f64) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::InvalidArgument(format!("cannot read model table {}: {e}", path.display()))
        })?;
        Self::parse(&text, gamma)
    }

    pub fn parse(text: &str, gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        let mut dim: Option<usize> = None;
        let mut times = Vec::new();
        let mut drift = Vec::new();
        let mut drive = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some((key, value)) = line.split_once('=') {
                if key.trim() != "dim" {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: format!("unknown header `{}`", key.trim()),
                    });
                }
                let n: usize = value.trim().parse().map_err(|_| Error::Parse {
                    line: line_no,
                    msg: format!("invalid dimension `{}`", value.trim()),
                })?;
                if n == 0 {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: "dimension must be positive".into(),
                    });
                }
                dim = Some(n);
                continue;
            }
            let n = dim.ok_or(Error::Parse {
                line: line_no,
                msg: "sample before `dim = N` header".into(),
            })?;
            let values: Vec<f64> = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>().map_err(|_| Error::Parse {
                        line: line_no,
                        msg: format!("invalid number `{tok}`"),
                    })
                })
                .collect::<Result<_>>()?;
            let expected = 1 + 4 * n * n;
            if values.len() != expected {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected {expected} numbers, found {}", values.len()),
                });
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "non-finite value".into(),
                });
            }
            if times.last().is_some_and(|&t| values[0] <= t) {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "sample times must be strictly increasing".into(),
                });
            }
            let b = to_matrix(n, &values[1..1 + 2 * n * n]);
            let c = to_matrix(n, &values[1 + 2 * n * n..]);
            for (m, what) in [(&b, "drift"), (&c, "drive")] {
                check_skew_hermitian(m, 1e-8 * m.norm().max(1.0)).map_err(|e| Error::Parse {
                    line: line_no,
                    msg: format!("{what}: {e}"),
                })?;
            }
            times.push(values[0]);
            drift.push(b);
            drive.push(c);
        }
        let Some(dim) = dim else {
            return Err(Error::Parse {
                line: 0,
                msg: "missing `dim = N` header".into(),
            });
        };
        if times.len() < 2 {
            return Err(Error::Parse {
                line: 0,
                msg: "at least two samples are required".into(),
            });
        }
        Ok(Self {
            dim,
            gamma,
            drift: Spline::new(&times, &drift),
            drive: Spline::new(&times, &drive),
            times,
        })
    }

    /// First and last sample times.
    pub fn time_range(&self) -> (f64, f64) {
        (self.times[0], self.times[self.times.len() - 1])
    }
}

fn to_matrix(n: usize, values: &[f64]) -> CMatrix {
    let entries: Vec<Complex64> = values
        .chunks_exact(2)
        .map(|p| Complex64::new(p[0], p[1]))
        .collect();
    CMatrix::from_row_slice(n, n, &entries)
}

impl GeneratorModel for TabulatedModel {
    fn name(&self) -> &str {
        "custom"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn gamma(&self) -> f64 {
        self.gamma
    }

    fn drift(&self, t: f64) -> CMatrix {
        self.drift.eval(&self.times, t)
    }

    fn drive(&self, t: f64) -> CMatrix {
        self.drive.eval(&self.times, t)
    }

    fn parameters(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("gamma", self.gamma),
            ("dim", self.dim as f64),
            ("samples", self.times.len() as f64),
        ]
    }

    fn interpolation(&self) -> Option<&'static str> {
        Some("natural cubic spline")
    }
}

/// Entry-wise natural cubic spline through matrix samples. Outside the
/// sample range the end values are held constant.
#[derive(Debug, Clone)]
struct Spline {
    values: Vec<CMatrix>,
    second: Vec<CMatrix>,
}

impl Spline {
    fn new(t: &[f64], y: &[CMatrix]) -> Self {
        let m = t.len();
        let shape = y[0].shape();
        let zero = CMatrix::zeros(shape.0, shape.1);
        let mut second = vec![zero.clone(); m];
        if m > 2 {
            // Thomas algorithm on the interior nodes; the system is real, so
            // each entry is solved with the same coefficients.
            let mut diag = vec![0.0; m];
            let mut rhs = vec![zero.clone(); m];
            let mut upper = vec![0.0; m];
            for i in 1..m - 1 {
                let h0 = t[i] - t[i - 1];
                let h1 = t[i + 1] - t[i];
                diag[i] = 2.0 * (h0 + h1);
                upper[i] = h1;
                rhs[i] = ((&y[i + 1] - &y[i]).scale(1.0 / h1) - (&y[i] - &y[i - 1]).scale(1.0 / h0))
                    .scale(6.0);
                if i > 1 {
                    let lower = h0;
                    let w = lower / diag[i - 1];
                    diag[i] -= w * upper[i - 1];
                    let prev = rhs[i - 1].scale(w);
                    rhs[i] -= prev;
                }
            }
            for i in (1..m - 1).rev() {
                let mut r = rhs[i].clone();
                if i + 1 < m - 1 {
                    r -= second[i + 1].scale(upper[i]);
                }
                second[i] = r.scale(1.0 / diag[i]);
            }
        }
        Self {
            values: y.to_vec(),
            second,
        }
    }

    fn eval(&self, t: &[f64], x: f64) -> CMatrix {
        let m = t.len();
        if x <= t[0] {
            return self.values[0].clone();
        }
        if x >= t[m - 1] {
            return self.values[m - 1].clone();
        }
        let i = t.partition_point(|&ti| ti <= x).clamp(1, m - 1) - 1;
        let h = t[i + 1] - t[i];
        let a = (t[i + 1] - x) / h;
        let b = (x - t[i]) / h;
        let c = (a * a * a - a) * h * h / 6.0;
        let d = (b * b * b - b) * h * h / 6.0;
        self.values[i].scale(a)
            + self.values[i + 1].scale(b)
            + self.second[i].scale(c)
            + self.second[i + 1].scale(d)
    }
}
