//! Synthetic G.fast binder channels and the on-disk tensor format.
//!
//! The binder model combines a frequency- and length-dependent direct path
//! with far-end crosstalk (FEXT) whose relative strength grows with
//! frequency, which is what makes joint precoding worthwhile at high tones:
//!
//! - direct gain: `|H_ll(f)| = 10^(-k1 * sqrt(f/1MHz) * d_l/100m / 20)` with
//!   phase `exp(-j 2 pi f d_l / v)`,
//! - FEXT power: `|H_lj(f)|^2 = K_fext * (f/1MHz)^2 * min(d_l,d_j)/1m
//!   * |H_ll(f)|^2 * X_lj` with a seeded log-normal pair factor `X`
//!   (`sigma = 3 dB`),
//! - flat noise floor converted from dBm/Hz to watts per tone.
//!
//! Generation is a pure function of `(topology, band, noise_psd)`: the same
//! seed yields a bitwise-identical tensor.
//!
//! # Channel file layout
//!
//! Little-endian throughout:
//!
//! ```text
//! magic  b"GFCH"            4 bytes
//! version u32               currently 1
//! n_tones u64, n_lines u64
//! f_start_hz f64, f_stop_hz f64
//! per tone n = 0..N, row l = 0..L, col j = 0..L: re f64, im f64
//! per tone n = 0..N, line l = 0..L: noise variance (W) f64
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::grid::ToneGrid;
use crate::linalg::CMatrix;

/// Direct-path attenuation slope, dB per sqrt(MHz) per 100 m.
pub const ATTENUATION_DB_SLOPE: f64 = 3.8;
/// Propagation speed on the pair, m/s.
pub const PROPAGATION_SPEED_MPS: f64 = 2.0e8;
/// FEXT reference frequency, Hz.
pub const FEXT_REF_HZ: f64 = 1.0e6;
/// Standard deviation of the log-normal FEXT pair factor, dB.
pub const FEXT_SIGMA_DB: f64 = 3.0;

/// Physical description of one copper binder.
#[derive(Debug, Clone, PartialEq)]
pub struct BinderTopology {
    pub num_lines: usize,
    pub line_lengths_m: Vec<f64>,
    /// Dimensionless FEXT coupling strength; 0 yields a diagonal channel.
    pub fext_coupling: f64,
    pub rng_seed: u64,
}

impl BinderTopology {
    pub fn validate(&self) -> Result<()> {
        if self.num_lines == 0 {
            return Err(Error::invalid("num_lines", "must be >= 1"));
        }
        if self.line_lengths_m.len() != self.num_lines {
            return Err(Error::DimensionMismatch(format!(
                "line_lengths_m has {} entries, num_lines is {}",
                self.line_lengths_m.len(),
                self.num_lines
            )));
        }
        for (i, &d) in self.line_lengths_m.iter().enumerate() {
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::invalid(
                    "line_lengths_m",
                    format!("length of line {i} must be finite and > 0, got {d}"),
                ));
            }
        }
        if !(self.fext_coupling.is_finite() && self.fext_coupling >= 0.0) {
            return Err(Error::invalid(
                "fext_coupling",
                format!("must be finite and >= 0, got {}", self.fext_coupling),
            ));
        }
        Ok(())
    }
}

/// DMT band plan. Tone spacing is derived as `(f_stop - f_start) / num_tones`
/// and tone `n` is evaluated at its center frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct BandPlan {
    pub num_tones: usize,
    pub f_start_hz: f64,
    pub f_stop_hz: f64,
    pub symbol_rate_hz: f64,
}

impl BandPlan {
    pub fn validate(&self) -> Result<()> {
        if self.num_tones == 0 {
            return Err(Error::invalid("num_tones", "must be >= 1"));
        }
        if !(self.f_start_hz.is_finite() && self.f_stop_hz.is_finite()) {
            return Err(Error::invalid("band", "frequencies must be finite"));
        }
        if !(self.f_stop_hz > self.f_start_hz && self.f_start_hz > 0.0) {
            return Err(Error::invalid(
                "band",
                format!(
                    "need f_stop > f_start > 0, got start {} stop {}",
                    self.f_start_hz, self.f_stop_hz
                ),
            ));
        }
        if !(self.symbol_rate_hz.is_finite() && self.symbol_rate_hz > 0.0) {
            return Err(Error::invalid("symbol_rate_hz", "must be > 0"));
        }
        Ok(())
    }

    #[inline]
    pub fn tone_spacing_hz(&self) -> f64 {
        (self.f_stop_hz - self.f_start_hz) / self.num_tones as f64
    }

    /// Center frequency of tone `n`.
    #[inline]
    pub fn tone_freq_hz(&self, tone: usize) -> f64 {
        self.f_start_hz + (tone as f64 + 0.5) * self.tone_spacing_hz()
    }
}

/// Per-tone complex channel matrices plus per-tone per-line noise variances.
/// Entry `(l, j)` of `h[n]` couples transmit line `j` into receiver `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTensor {
    n_tones: usize,
    n_lines: usize,
    f_start_hz: f64,
    f_stop_hz: f64,
    h: Vec<CMatrix>,
    noise_w: ToneGrid,
}

impl ChannelTensor {
    pub fn new(
        f_start_hz: f64,
        f_stop_hz: f64,
        h: Vec<CMatrix>,
        noise_w: ToneGrid,
    ) -> Result<Self> {
        let n_tones = h.len();
        if n_tones == 0 {
            return Err(Error::invalid("h", "need at least one tone"));
        }
        let n_lines = h[0].nrows();
        for (n, m) in h.iter().enumerate() {
            if m.nrows() != n_lines || m.ncols() != n_lines {
                return Err(Error::DimensionMismatch(format!(
                    "tone {n}: channel matrix is {}x{}, expected {n_lines}x{n_lines}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            for l in 0..n_lines {
                let d = m[(l, l)].norm();
                if !(d.is_finite() && d > 0.0) {
                    return Err(Error::invalid(
                        "h",
                        format!("tone {n} line {l}: diagonal magnitude must be finite and nonzero"),
                    ));
                }
            }
        }
        if noise_w.n_tones() != n_tones || noise_w.n_lines() != n_lines {
            return Err(Error::DimensionMismatch(format!(
                "noise table is {}x{}, expected {n_tones}x{n_lines}",
                noise_w.n_tones(),
                noise_w.n_lines()
            )));
        }
        if noise_w.data().iter().any(|&v| !(v.is_finite() && v > 0.0)) {
            return Err(Error::invalid("noise", "all noise variances must be > 0"));
        }
        Ok(ChannelTensor {
            n_tones,
            n_lines,
            f_start_hz,
            f_stop_hz,
            h,
            noise_w,
        })
    }

    #[inline]
    pub fn n_tones(&self) -> usize {
        self.n_tones
    }

    #[inline]
    pub fn n_lines(&self) -> usize {
        self.n_lines
    }

    #[inline]
    pub fn f_start_hz(&self) -> f64 {
        self.f_start_hz
    }

    #[inline]
    pub fn f_stop_hz(&self) -> f64 {
        self.f_stop_hz
    }

    #[inline]
    pub fn matrix(&self, tone: usize) -> &CMatrix {
        &self.h[tone]
    }

    #[inline]
    pub fn noise_w(&self, tone: usize, line: usize) -> f64 {
        self.noise_w.get(tone, line)
    }

    pub fn noise_table(&self) -> &ToneGrid {
        &self.noise_w
    }
}

/// Convert a PSD in dBm/Hz to watts per tone of width `tone_spacing_hz`.
pub fn dbm_per_hz_to_watts(psd_dbm_hz: f64, tone_spacing_hz: f64) -> f64 {
    10f64.powf((psd_dbm_hz - 30.0) / 10.0) * tone_spacing_hz
}

/// Convert a total power in dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Direct-path magnitude for frequency `f_hz` and length `d_m`.
fn direct_magnitude(f_hz: f64, d_m: f64) -> f64 {
    let att_db = ATTENUATION_DB_SLOPE * (f_hz / 1.0e6).sqrt() * (d_m / 100.0);
    10f64.powf(-att_db / 20.0)
}

/// Generate a binder channel tensor. Deterministic for a fixed
/// `topology.rng_seed`.
pub fn generate_channel(
    topology: &BinderTopology,
    band: &BandPlan,
    noise_psd_dbm_hz: f64,
) -> Result<ChannelTensor> {
    topology.validate()?;
    band.validate()?;
    if !noise_psd_dbm_hz.is_finite() {
        return Err(Error::invalid("noise_psd_dbm_hz", "must be finite"));
    }

    let l_count = topology.num_lines;
    let n_count = band.num_tones;
    let lengths = &topology.line_lengths_m;

    // Seeded pair factors: one log-normal power factor per unordered pair,
    // one phase offset per ordered pair, drawn in a fixed order.
    let mut rng = ChaCha12Rng::seed_from_u64(topology.rng_seed);
    let normal = Normal::new(0.0, FEXT_SIGMA_DB).expect("valid normal");
    let mut pair_factor = vec![vec![0.0f64; l_count]; l_count];
    let mut pair_phase = vec![vec![0.0f64; l_count]; l_count];
    for l in 0..l_count {
        for j in 0..l {
            let x_db: f64 = normal.sample(&mut rng);
            let x = 10f64.powf(x_db / 10.0);
            pair_factor[l][j] = x;
            pair_factor[j][l] = x;
            pair_phase[l][j] = rng.gen_range(0.0..std::f64::consts::TAU);
            pair_phase[j][l] = rng.gen_range(0.0..std::f64::consts::TAU);
        }
    }

    let noise_per_tone = dbm_per_hz_to_watts(noise_psd_dbm_hz, band.tone_spacing_hz());
    if !(noise_per_tone.is_finite() && noise_per_tone > 0.0) {
        return Err(Error::invalid(
            "noise_psd_dbm_hz",
            format!("converts to non-positive noise power {noise_per_tone} W"),
        ));
    }

    let mut h = Vec::with_capacity(n_count);
    for n in 0..n_count {
        let f = band.tone_freq_hz(n);
        let mut m = CMatrix::zeros(l_count, l_count);
        for l in 0..l_count {
            let mag = direct_magnitude(f, lengths[l]);
            let phase = -std::f64::consts::TAU * f * lengths[l] / PROPAGATION_SPEED_MPS;
            m[(l, l)] = Complex64::from_polar(mag, phase);
        }
        if topology.fext_coupling > 0.0 {
            for l in 0..l_count {
                let direct_l = m[(l, l)].norm();
                for j in 0..l_count {
                    if j == l {
                        continue;
                    }
                    let d_min = lengths[l].min(lengths[j]);
                    let power = topology.fext_coupling
                        * (f / FEXT_REF_HZ).powi(2)
                        * d_min
                        * direct_l
                        * direct_l
                        * pair_factor[l][j];
                    let phase = -std::f64::consts::TAU * f * d_min / PROPAGATION_SPEED_MPS
                        + pair_phase[l][j];
                    m[(l, j)] = Complex64::from_polar(power.sqrt(), phase);
                }
            }
        }
        h.push(m);
    }

    let noise = ToneGrid::filled(n_count, l_count, noise_per_tone);
    ChannelTensor::new(band.f_start_hz, band.f_stop_hz, h, noise)
}

const MAGIC: &[u8; 4] = b"GFCH";
const FORMAT_VERSION: u32 = 1;

/// Write a tensor to `path` in the binary layout documented at module level.
pub fn save_channel(tensor: &ChannelTensor, path: &Path) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(tensor.n_tones as u64).to_le_bytes())?;
    w.write_all(&(tensor.n_lines as u64).to_le_bytes())?;
    w.write_all(&tensor.f_start_hz.to_le_bytes())?;
    w.write_all(&tensor.f_stop_hz.to_le_bytes())?;
    for n in 0..tensor.n_tones {
        let m = &tensor.h[n];
        for l in 0..tensor.n_lines {
            for j in 0..tensor.n_lines {
                let z = m[(l, j)];
                w.write_all(&z.re.to_le_bytes())?;
                w.write_all(&z.im.to_le_bytes())?;
            }
        }
    }
    for n in 0..tensor.n_tones {
        for l in 0..tensor.n_lines {
            w.write_all(&tensor.noise_w.get(n, l).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

struct SectionReader<'a, R> {
    inner: R,
    path: &'a Path,
}

impl<'a, R: Read> SectionReader<'a, R> {
    fn fail(&self, reason: String) -> Error {
        Error::ChannelFile {
            path: self.path.to_path_buf(),
            reason,
        }
    }

    fn read_exact(&mut self, buf: &mut [u8], what: &dyn Fn() -> String) -> Result<()> {
        self.inner
            .read_exact(buf)
            .map_err(|e| self.fail(format!("{} ({e})", what())))
    }

    fn read_u32(&mut self, what: &str) -> Result<u32> {
        let mut b = [0u8; 4];
        self.read_exact(&mut b, &|| format!("truncated while reading {what}"))?;
        Ok(u32::from_le_bytes(b))
    }

    fn read_u64(&mut self, what: &str) -> Result<u64> {
        let mut b = [0u8; 8];
        self.read_exact(&mut b, &|| format!("truncated while reading {what}"))?;
        Ok(u64::from_le_bytes(b))
    }

    fn read_f64(&mut self, what: &dyn Fn() -> String) -> Result<f64> {
        let mut b = [0u8; 8];
        self.read_exact(&mut b, what)?;
        Ok(f64::from_le_bytes(b))
    }
}

/// Read a tensor previously written by [`save_channel`]. Errors name the tone
/// at which a truncated or malformed file stopped being readable.
pub fn load_channel(path: &Path) -> Result<ChannelTensor> {
    let file = File::open(path).map_err(|e| Error::ChannelFile {
        path: path.to_path_buf(),
        reason: format!("cannot open: {e}"),
    })?;
    let mut r = SectionReader {
        inner: BufReader::new(file),
        path,
    };

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic, &|| "truncated while reading magic".to_string())?;
    if &magic != MAGIC {
        return Err(r.fail(format!("bad magic {magic:?}, expected {MAGIC:?}")));
    }
    let version = r.read_u32("version")?;
    if version != FORMAT_VERSION {
        return Err(r.fail(format!(
            "unsupported format version {version}, expected {FORMAT_VERSION}"
        )));
    }
    let n_tones = r.read_u64("n_tones")? as usize;
    let n_lines = r.read_u64("n_lines")? as usize;
    if n_tones == 0 || n_lines == 0 {
        return Err(r.fail(format!("degenerate dimensions {n_tones}x{n_lines}")));
    }
    if n_tones.checked_mul(n_lines * n_lines).is_none() || n_tones > (1 << 32) {
        return Err(r.fail(format!("implausible dimensions {n_tones}x{n_lines}")));
    }
    let f_start = r.read_f64(&|| "truncated while reading f_start_hz".to_string())?;
    let f_stop = r.read_f64(&|| "truncated while reading f_stop_hz".to_string())?;

    let mut h = Vec::with_capacity(n_tones);
    for n in 0..n_tones {
        let mut m = CMatrix::zeros(n_lines, n_lines);
        for l in 0..n_lines {
            for j in 0..n_lines {
                let re = r.read_f64(&|| format!("truncated at tone {n}, entry ({l},{j})"))?;
                let im = r.read_f64(&|| format!("truncated at tone {n}, entry ({l},{j})"))?;
                m[(l, j)] = Complex64::new(re, im);
            }
        }
        h.push(m);
    }
    let mut noise = ToneGrid::zeros(n_tones, n_lines);
    for n in 0..n_tones {
        for l in 0..n_lines {
            let v = r.read_f64(&|| format!("truncated in noise table at tone {n}, line {l}"))?;
            noise.set(n, l, v);
        }
    }
    ChannelTensor::new(f_start, f_stop, h, noise)
}
