//! Perturbed particle in a box.
//!
//! Unperturbed eigenpairs of `H⁰ = -A d²/dz²` on `[0, L]`:
//!
//! ```text
//! φₙ(z) = sqrt(2/L) sin(π n z / L)        E⁰ₙ = (π/L)² A n²
//! ```
//!
//! The perturbation is `V(z) = sin(2π t z / L)`, which has `t` evenly spaced
//! minima in the box. First-order quantities are matrix elements of `V` in
//! the sine basis:
//!
//! ```text
//! E¹ₙ   = ⟨φₙ|V|φₙ⟩
//! c_m,n = ⟨φₘ|V|φₙ⟩
//! ψₙ    = φₙ + Σ_{m≠n} c_m,n φₘ
//! ```
//!
//! Every matrix element has a closed form (built from `∫₀¹ sin(π w x) dx`)
//! and an independent Gauss-Legendre evaluation used as its test oracle.
//! The closed forms accept real `n`, which the energy network needs.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::DMatrix;

use crate::csvio::{self, field, header};
use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

/// How `c_m,n` enters the expansion of ψₙ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CouplingMode {
    /// `c_m,n = ⟨φₘ|V|φₙ⟩` as is.
    #[default]
    Bare,
    /// Rayleigh-Schrödinger form `⟨φₘ|V|φₙ⟩ / (E⁰ₙ − E⁰ₘ)`.
    Textbook,
}

impl CouplingMode {
    pub fn tag(self) -> &'static str {
        match self {
            CouplingMode::Bare => "bare",
            CouplingMode::Textbook => "textbook",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "bare" => Some(CouplingMode::Bare),
            "textbook" => Some(CouplingMode::Textbook),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxSpec {
    /// Box length `L`.
    pub length: f64,
    /// Kinetic constant `A`.
    pub kinetic: f64,
    /// Number of potential minima `t`.
    pub frequency: u32,
    /// Weight α of the kinetic energy in the training loss.
    pub alpha: f64,
    /// Mode cutoff `M` for tables and expansions.
    pub modes: usize,
    pub coupling_mode: CouplingMode,
}

impl Default for BoxSpec {
    fn default() -> Self {
        BoxSpec {
            length: 1.0,
            kinetic: 1.0,
            frequency: 3,
            alpha: 1.0,
            modes: 10,
            coupling_mode: CouplingMode::Bare,
        }
    }
}

impl BoxSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(Error::config("box.length", "must be positive and finite"));
        }
        if !(self.kinetic > 0.0 && self.kinetic.is_finite()) {
            return Err(Error::config("box.kinetic", "must be positive and finite"));
        }
        if self.frequency < 1 {
            return Err(Error::config("box.frequency", "must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::config("box.alpha", "must be positive and finite"));
        }
        if self.modes < 2 {
            return Err(Error::config("box.modes", "must be at least 2"));
        }
        Ok(())
    }

    fn t(&self) -> f64 {
        self.frequency as f64
    }
}

/// Unperturbed eigenfunction `sqrt(2/L) sin(π n z / L)`; `n` may be real.
pub fn phi(n: f64, z: f64, spec: &BoxSpec) -> f64 {
    let l = spec.length;
    (2.0 / l).sqrt() * (PI * n * z / l).sin()
}

/// Unperturbed energy `(π/L)² A n²`.
pub fn e0(n: f64, spec: &BoxSpec) -> f64 {
    let k = PI / spec.length;
    k * k * spec.kinetic * n * n
}

/// Perturbing potential `sin(2π t z / L)`.
pub fn potential(z: f64, spec: &BoxSpec) -> f64 {
    (2.0 * PI * spec.t() * z / spec.length).sin()
}

/// `∫₀¹ sin(π w x) dx = 2 sin²(π w / 2) / (π w)`, with value 0 at `w = 0`.
fn half_wave_integral(w: f64) -> f64 {
    if w == 0.0 {
        return 0.0;
    }
    let x = 0.5 * PI * w;
    let s = x.sin();
    s * s / x
}

/// `d/dw ∫₀¹ sin(π w x) dx`.
fn half_wave_integral_derivative(w: f64) -> f64 {
    let x = 0.5 * PI * w;
    // d/dx [sin²x / x] = (x sin 2x − sin²x) / x²
    let g = if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 + 2.0 * x2 * x2 / 9.0
    } else {
        let s = x.sin();
        (x * (2.0 * x).sin() - s * s) / (x * x)
    };
    0.5 * PI * g
}

/// First-order energy `E¹ₙ = (2/L) ∫₀ᴸ sin²(πnz/L) sin(2πtz/L) dz` in closed
/// form, valid for every real `n > 0`.
///
/// With `x = z/L` and `sin² = (1 − cos)/2` the integral reduces to
/// `I(2t) − ½[I(2t + 2n) + I(2t − 2n)]` where `I(w) = ∫₀¹ sin(πwx) dx`.
/// `I` is continuous at 0, so `n = t` and `n → 0` need no special casing.
pub fn e1_closed(n: f64, spec: &BoxSpec) -> f64 {
    let t2 = 2.0 * spec.t();
    let n2 = 2.0 * n;
    half_wave_integral(t2) - 0.5 * (half_wave_integral(t2 + n2) + half_wave_integral(t2 - n2))
}

/// `dE¹ₙ/dn` of [`e1_closed`].
pub fn e1_derivative(n: f64, spec: &BoxSpec) -> f64 {
    let t2 = 2.0 * spec.t();
    let n2 = 2.0 * n;
    -(half_wave_integral_derivative(t2 + n2) - half_wave_integral_derivative(t2 - n2))
}

/// Nodes per Gauss-Legendre panel used by the quadrature oracles.
pub const ORACLE_NODES: usize = 64;

fn oracle_panels(points: usize, max_half_periods: f64) -> usize {
    let by_points = points.div_ceil(ORACLE_NODES);
    // panels no wider than half the shortest oscillation period
    let by_period = max_half_periods.ceil() as usize + 1;
    by_points.max(by_period).max(1)
}

/// Quadrature oracle for [`e1_closed`]: roughly `points` evaluations of the
/// integrand, never fewer panels than half-periods of the fastest component.
pub fn e1_quad(n: f64, spec: &BoxSpec, points: usize) -> f64 {
    let l = spec.length;
    let gl = GaussLegendre::new(ORACLE_NODES);
    let panels = oracle_panels(points, 2.0 * (n.abs() + spec.t()));
    let integrand = |z: f64| {
        let s = (PI * n * z / l).sin();
        (2.0 / l) * s * s * potential(z, spec)
    };
    gl.integrate(integrand, 0.0, l, panels)
}

/// Closed-form `⟨φₘ|V|φₙ⟩`; reduces to [`e1_closed`] when `m = n`.
///
/// `sin a sin b = ½[cos(a−b) − cos(a+b)]` turns the integrand into two
/// cosine-times-sine products, each again a sum of `I(w)` terms.
pub fn coupling(m: u32, n: u32, spec: &BoxSpec) -> f64 {
    coupling_real(m as f64, n as f64, spec)
}

fn coupling_real(m: f64, n: f64, spec: &BoxSpec) -> f64 {
    let t2 = 2.0 * spec.t();
    let cos_sin = |p: f64| 0.5 * (half_wave_integral(t2 + p) + half_wave_integral(t2 - p));
    cos_sin(m - n) - cos_sin(m + n)
}

/// Quadrature oracle for [`coupling`].
pub fn coupling_quad(m: u32, n: u32, spec: &BoxSpec, points: usize) -> f64 {
    let l = spec.length;
    let (mf, nf) = (m as f64, n as f64);
    let gl = GaussLegendre::new(ORACLE_NODES);
    let panels = oracle_panels(points, mf + nf + 2.0 * spec.t());
    let integrand = |z: f64| phi(mf, z, spec) * phi(nf, z, spec) * potential(z, spec);
    gl.integrate(integrand, 0.0, l, panels)
}

/// Quadrature of `∫₀ᴸ φₘ φₙ dz`.
pub fn overlap_quad(m: u32, n: u32, spec: &BoxSpec, points: usize) -> f64 {
    let (mf, nf) = (m as f64, n as f64);
    let gl = GaussLegendre::new(ORACLE_NODES);
    let panels = oracle_panels(points, mf + nf);
    gl.integrate(
        |z| phi(mf, z, spec) * phi(nf, z, spec),
        0.0,
        spec.length,
        panels,
    )
}

/// Tabulated first-order quantities for modes `1..=M`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumTable {
    pub spec: BoxSpec,
    /// `E⁰ₙ` for n = 1..=M (index n − 1).
    pub e0: Vec<f64>,
    /// `E¹ₙ` for n = 1..=M.
    pub e1: Vec<f64>,
    /// `⟨φₘ|V|φₙ⟩`, `M × M`, index `(m − 1, n − 1)`. The diagonal holds E¹ₙ;
    /// expansions skip it.
    pub coupling: DMatrix<f64>,
}

impl SpectrumTable {
    pub fn modes(&self) -> usize {
        self.e0.len()
    }

    /// Coefficient of φₘ in the expansion of ψₙ (zero for `m = n`).
    pub fn expansion_coefficient(&self, m: usize, n: usize) -> f64 {
        if m == n {
            return 0.0;
        }
        let c = self.coupling[(m - 1, n - 1)];
        match self.spec.coupling_mode {
            CouplingMode::Bare => c,
            CouplingMode::Textbook => c / (self.e0[n - 1] - self.e0[m - 1]),
        }
    }

    /// Largest deviation of any closed-form entry from its quadrature oracle.
    pub fn max_oracle_deviation(&self, points: usize) -> f64 {
        let mut worst: f64 = 0.0;
        for n in 1..=self.modes() {
            worst = worst.max((self.e1[n - 1] - e1_quad(n as f64, &self.spec, points)).abs());
            for m in 1..=self.modes() {
                let q = coupling_quad(m as u32, n as u32, &self.spec, points);
                worst = worst.max((self.coupling[(m - 1, n - 1)] - q).abs());
            }
        }
        worst
    }
}

impl SpectrumTable {
    /// `n,E0,E1`, one row per mode.
    pub fn write_spectrum_csv(&self, path: &Path) -> Result<()> {
        let rows = (0..self.modes()).map(|i| {
            vec![(i + 1).to_string(), self.e0[i].to_string(), self.e1[i].to_string()]
        });
        csvio::write_csv(path, &header(["n", "E0", "E1"]), rows)
    }

    /// `m,n,c`, row-major over the full `M × M` matrix.
    pub fn write_coupling_csv(&self, path: &Path) -> Result<()> {
        let m = self.modes();
        let rows = (0..m * m).map(|k| {
            let (i, j) = (k / m, k % m);
            vec![(i + 1).to_string(), (j + 1).to_string(), self.coupling[(i, j)].to_string()]
        });
        csvio::write_csv(path, &header(["m", "n", "c"]), rows)
    }

    /// Reads the two tables back; `spec` supplies the physical parameters.
    pub fn read_csv(spectrum: &Path, coupling: &Path, spec: &BoxSpec) -> Result<Self> {
        let rows = csvio::read_csv(spectrum, &header(["n", "E0", "E1"]))?;
        let m = rows.len();
        let mut e0 = Vec::with_capacity(m);
        let mut e1 = Vec::with_capacity(m);
        for (i, r) in rows.iter().enumerate() {
            let n: usize = field(r, 0, spectrum)?;
            if n != i + 1 {
                return Err(Error::parse(spectrum.display().to_string(), format!("row {i} has mode {n}")));
            }
            e0.push(field(r, 1, spectrum)?);
            e1.push(field(r, 2, spectrum)?);
        }
        let cells = csvio::read_csv(coupling, &header(["m", "n", "c"]))?;
        if cells.len() != m * m {
            return Err(Error::parse(
                coupling.display().to_string(),
                format!("expected {} entries, found {}", m * m, cells.len()),
            ));
        }
        let mut c = DMatrix::zeros(m, m);
        for r in &cells {
            let (i, j): (usize, usize) = (field(r, 0, coupling)?, field(r, 1, coupling)?);
            if i == 0 || j == 0 || i > m || j > m {
                return Err(Error::parse(coupling.display().to_string(), format!("index ({i}, {j}) out of range")));
            }
            c[(i - 1, j - 1)] = field(r, 2, coupling)?;
        }
        Ok(SpectrumTable {
            spec: BoxSpec { modes: m, ..*spec },
            e0,
            e1,
            coupling: c,
        })
    }
}

pub fn build_table(spec: &BoxSpec) -> Result<SpectrumTable> {
    spec.validate()?;
    let m = spec.modes;
    let e0s = (1..=m).map(|n| e0(n as f64, spec)).collect();
    let e1s = (1..=m).map(|n| e1_closed(n as f64, spec)).collect();
    let coupling = DMatrix::from_fn(m, m, |i, j| coupling((i + 1) as u32, (j + 1) as u32, spec));
    Ok(SpectrumTable {
        spec: *spec,
        e0: e0s,
        e1: e1s,
        coupling,
    })
}

/// `φₙ(z) + Σ_{m ≤ M, m ≠ n} c_m,n φₘ(z)`.
pub fn perturbed_psi(n: usize, z: f64, table: &SpectrumTable) -> Result<f64> {
    if n == 0 || n > table.modes() {
        return Err(Error::Contract(format!(
            "mode {n} outside the table range 1..={}",
            table.modes()
        )));
    }
    let spec = &table.spec;
    let base = phi(n as f64, z, spec);
    let correction: f64 = (1..=table.modes())
        .filter(|&m| m != n)
        .map(|m| table.expansion_coefficient(m, n) * phi(m as f64, z, spec))
        .sum();
    Ok(base + correction)
}

/// Affine map from latent scalars into `[margin, L − margin]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxMap {
    pub min: f64,
    pub max: f64,
    pub margin: f64,
    pub length: f64,
}

impl BoxMap {
    /// Fits the min-max range of `values`.
    pub fn fit(values: &[f64], length: f64, margin: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Contract("cannot map an empty vector into the box".into()));
        }
        if !(margin >= 0.0 && 2.0 * margin < length) {
            return Err(Error::Contract(format!(
                "margin {margin} leaves no room in a box of length {length}"
            )));
        }
        let (min, max) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        if !(min.is_finite() && max.is_finite()) {
            return Err(Error::Contract("non-finite value in box mapping input".into()));
        }
        Ok(BoxMap {
            min,
            max,
            margin,
            length,
        })
    }

    /// Maps one value; values outside the fitted range are clamped.
    pub fn apply(&self, v: f64) -> f64 {
        if self.max == self.min {
            return 0.5 * self.length;
        }
        let span = self.length - 2.0 * self.margin;
        let u = ((v - self.min) / (self.max - self.min)).clamp(0.0, 1.0);
        self.margin + u * span
    }
}

/// Min-max rescale of `values` onto `[margin, L − margin]`; a constant input
/// maps to `L/2`.
pub fn map_to_box(values: &[f64], spec: &BoxSpec, margin: f64) -> Result<Vec<f64>> {
    let map = BoxMap::fit(values, spec.length, margin)?;
    Ok(values.iter().map(|&v| map.apply(v)).collect())
}
