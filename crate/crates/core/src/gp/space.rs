use serde::{Deserialize, Serialize};

use crate::error::SpaceError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Encoding {
    /// One bounded value.
    Scalar,
    /// `n_bins` values on a line from a free start to a free end.
    Ramp { n_bins: usize },
    /// `n_bins` independent bounded values.
    FreeBins { n_bins: usize },
}

impl Encoding {
    /// Unit-box coordinates this encoding consumes.
    pub fn width(self) -> usize {
        match self {
            Self::Scalar => 1,
            Self::Ramp { .. } => 2,
            Self::FreeBins { n_bins } => n_bins,
        }
    }

    /// Values it expands into.
    pub fn n_values(self) -> usize {
        match self {
            Self::Scalar => 1,
            Self::Ramp { n_bins } | Self::FreeBins { n_bins } => n_bins,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dim {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub encoding: Encoding,
}

impl Dim {
    pub fn scalar(name: impl Into<String>, lower: f64, upper: f64) -> Self {
        Self {
            name: name.into(),
            lower,
            upper,
            encoding: Encoding::Scalar,
        }
    }

    pub fn ramp(name: impl Into<String>, lower: f64, upper: f64, n_bins: usize) -> Self {
        Self {
            name: name.into(),
            lower,
            upper,
            encoding: Encoding::Ramp { n_bins },
        }
    }

    pub fn free_bins(name: impl Into<String>, lower: f64, upper: f64, n_bins: usize) -> Self {
        Self {
            name: name.into(),
            lower,
            upper,
            encoding: Encoding::FreeBins { n_bins },
        }
    }

    fn to_value(&self, u: f64) -> f64 {
        self.lower + u * (self.upper - self.lower)
    }

    fn to_unit(&self, v: f64) -> f64 {
        (v - self.lower) / (self.upper - self.lower)
    }
}

/// A named parameter expanded to its bin values (one value for scalars).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub name: String,
    pub values: Vec<f64>,
}

/// Bounded search space, represented internally as a unit box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpace {
    pub dims: Vec<Dim>,
}

impl ParamSpace {
    pub fn new(dims: Vec<Dim>) -> Result<Self, SpaceError> {
        if dims.is_empty() {
            return Err(SpaceError::Empty);
        }
        for d in &dims {
            let bad = |message: String| SpaceError::InvalidDim {
                name: d.name.clone(),
                message,
            };
            if !(d.lower.is_finite() && d.upper.is_finite() && d.lower < d.upper) {
                return Err(bad(format!("need lower < upper, got [{}, {}]", d.lower, d.upper)));
            }
            match d.encoding {
                Encoding::Ramp { n_bins } if n_bins < 2 => {
                    return Err(bad("a ramp needs at least 2 bins".into()));
                }
                Encoding::FreeBins { n_bins: 0 } => {
                    return Err(bad("free bins need at least 1 bin".into()));
                }
                _ => {}
            }
            if dims.iter().filter(|o| o.name == d.name).count() > 1 {
                return Err(bad("duplicate name".into()));
            }
        }
        Ok(Self { dims })
    }

    /// Number of unit-box coordinates.
    pub fn dimension(&self) -> usize {
        self.dims.iter().map(|d| d.encoding.width()).sum()
    }

    /// Column labels for the unit-box coordinates.
    pub fn coordinate_names(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.dimension());
        for d in &self.dims {
            match d.encoding {
                Encoding::Scalar => out.push(d.name.clone()),
                Encoding::Ramp { .. } => {
                    out.push(format!("{}.start", d.name));
                    out.push(format!("{}.end", d.name));
                }
                Encoding::FreeBins { n_bins } => {
                    out.extend((0..n_bins).map(|k| format!("{}[{k}]", d.name)));
                }
            }
        }
        out
    }

    /// Map a unit-box point to parameter values, expanding ramps and bins.
    pub fn encode(&self, x: &[f64]) -> Result<Vec<Assignment>, SpaceError> {
        self.check(x)?;
        let mut k = 0;
        let mut out = Vec::with_capacity(self.dims.len());
        for d in &self.dims {
            let values = match d.encoding {
                Encoding::Scalar => vec![d.to_value(x[k])],
                Encoding::Ramp { n_bins } => {
                    let (a, b) = (d.to_value(x[k]), d.to_value(x[k + 1]));
                    (0..n_bins)
                        .map(|i| a + (b - a) * i as f64 / (n_bins - 1) as f64)
                        .collect()
                }
                Encoding::FreeBins { n_bins } => (0..n_bins).map(|i| d.to_value(x[k + i])).collect(),
            };
            k += d.encoding.width();
            out.push(Assignment {
                name: d.name.clone(),
                values,
            });
        }
        Ok(out)
    }

    /// Inverse of [`ParamSpace::encode`]; ramps are read from their end bins.
    pub fn decode(&self, params: &[Assignment]) -> Result<Vec<f64>, SpaceError> {
        if params.len() != self.dims.len() {
            return Err(SpaceError::Length {
                expected: self.dims.len(),
                got: params.len(),
            });
        }
        let mut x = Vec::with_capacity(self.dimension());
        for (d, p) in self.dims.iter().zip(params) {
            if p.name != d.name || p.values.len() != d.encoding.n_values() {
                return Err(SpaceError::InvalidDim {
                    name: d.name.clone(),
                    message: format!("assignment `{}` with {} values does not match", p.name, p.values.len()),
                });
            }
            match d.encoding {
                Encoding::Scalar | Encoding::FreeBins { .. } => x.extend(p.values.iter().map(|&v| d.to_unit(v))),
                Encoding::Ramp { .. } => {
                    x.push(d.to_unit(p.values[0]));
                    x.push(d.to_unit(*p.values.last().unwrap_or(&p.values[0])));
                }
            }
        }
        self.check(&x)?;
        Ok(x)
    }

    fn check(&self, x: &[f64]) -> Result<(), SpaceError> {
        if x.len() != self.dimension() {
            return Err(SpaceError::Length {
                expected: self.dimension(),
                got: x.len(),
            });
        }
        const SLACK: f64 = 1e-12;
        match x.iter().position(|u| !(*u >= -SLACK && *u <= 1.0 + SLACK)) {
            Some(index) => Err(SpaceError::OutOfBox { index, value: x[index] }),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_expands_linearly() {
        let s = ParamSpace::new(vec![Dim::ramp("power", 0.0, 19.0, 20)]).unwrap();
        let a = s.encode(&[0.0, 1.0]).unwrap();
        let expected: Vec<f64> = (0..20).map(f64::from).collect();
        for (v, e) in a[0].values.iter().zip(&expected) {
            assert!((v - e).abs() < 1e-12);
        }
    }

    #[test]
    fn scalar_and_bins_map_affinely() {
        let s = ParamSpace::new(vec![Dim::scalar("w", 10.0, 30.0), Dim::free_bins("b", 0.0, 10.0, 5)]).unwrap();
        assert_eq!(s.dimension(), 6);
        let a = s.encode(&[0.5, 0.2, 0.4, 0.6, 0.8, 1.0]).unwrap();
        assert!((a[0].values[0] - 20.0).abs() < 1e-12);
        for (v, e) in a[1].values.iter().zip([2.0, 4.0, 6.0, 8.0, 10.0]) {
            assert!((v - e).abs() < 1e-12);
        }
        assert_eq!(s.coordinate_names()[1], "b[0]");
    }

    #[test]
    fn invalid_inputs() {
        assert_eq!(ParamSpace::new(vec![]).unwrap_err(), SpaceError::Empty);
        assert!(ParamSpace::new(vec![Dim::scalar("a", 1.0, 1.0)]).is_err());
        assert!(ParamSpace::new(vec![Dim::ramp("a", 0.0, 1.0, 1)]).is_err());
        let s = ParamSpace::new(vec![Dim::scalar("a", 0.0, 1.0)]).unwrap();
        assert!(matches!(s.encode(&[1.5]), Err(SpaceError::OutOfBox { index: 0, .. })));
        assert!(matches!(s.encode(&[0.1, 0.2]), Err(SpaceError::Length { .. })));
    }

    proptest::proptest! {
        #[test]
        fn round_trip(x in proptest::collection::vec(0.0f64..=1.0, 6)) {
            let s = ParamSpace::new(vec![
                Dim::scalar("a", -3.0, 7.0),
                Dim::ramp("r", 0.5, 2.5, 7),
                Dim::free_bins("f", -1.0, 1.0, 3),
            ]).unwrap();
            let back = s.decode(&s.encode(&x).unwrap()).unwrap();
            for (u, v) in x.iter().zip(&back) {
                proptest::prop_assert!((u - v).abs() < 1e-12);
            }
        }
    }
}
