//! Per-tone ZF and ZF-THP precoder construction and rate evaluation.
//!
//! Both schemes force the residual interference seen by every served user to
//! zero, so the per-user rate on a tone reduces to
//! `log2(1 + g_eff * p / (Gamma * sigma^2))` where `g_eff` is the effective
//! direct gain of the unit-power structural column:
//!
//! - ZF: columns are the normalized columns of the right pseudo-inverse of
//!   the active-row channel submatrix; every served user is orthogonal to
//!   every other served user's channel row.
//! - ZF-THP: a triangular factorization in the encoding order. The user
//!   encoded first keeps its matched-filter direction and each later user is
//!   projected orthogonal to all earlier users' rows, so a receiver sees no
//!   interference from later-encoded streams and the interference from
//!   earlier-encoded streams is removed by the successive encoding (feedback
//!   filter). Encoding a user early is therefore the favorable slot.
//!
//! The receiver-side modulo of THP and its power/modulo/shaping losses are
//! not simulated; rates use the interference-free expression above.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelTensor;
use crate::demand::PriorityPartition;
use crate::error::{Error, Result};
use crate::linalg::{ordered_triangular_factor, right_pseudo_inverse, CMatrix};

/// Precoding scheme selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrecoderKind {
    ZfLinear,
    ZfThp,
}

impl PrecoderKind {
    pub fn label(&self) -> &'static str {
        match self {
            PrecoderKind::ZfLinear => "zf_linear",
            PrecoderKind::ZfThp => "zf_thp",
        }
    }
}

impl std::fmt::Display for PrecoderKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// SNR gap accounting for practical coding and modulation losses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrGap {
    linear: f64,
}

impl SnrGap {
    pub fn from_linear(linear: f64) -> Result<Self> {
        if !(linear.is_finite() && linear >= 1.0) {
            return Err(Error::invalid(
                "snr_gap",
                format!("linear gap must be >= 1, got {linear}"),
            ));
        }
        Ok(SnrGap { linear })
    }

    pub fn from_db(db: f64) -> Result<Self> {
        if !db.is_finite() || db < 0.0 {
            return Err(Error::invalid(
                "snr_gap",
                format!("gap in dB must be >= 0, got {db}"),
            ));
        }
        Self::from_linear(10f64.powf(db / 10.0))
    }

    #[inline]
    pub fn linear(&self) -> f64 {
        self.linear
    }
}

/// Tone-independent encoding order: a permutation of all line indices.
/// Position 0 is encoded first (the favorable THP slot).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodingOrder(Vec<usize>);

impl EncodingOrder {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let l = order.len();
        let mut seen = vec![false; l];
        for &i in &order {
            if i >= l || seen[i] {
                return Err(Error::invalid(
                    "encoding_order",
                    format!("not a permutation of 0..{l}"),
                ));
            }
            seen[i] = true;
        }
        Ok(EncodingOrder(order))
    }

    pub fn identity(n_lines: usize) -> Self {
        EncodingOrder((0..n_lines).collect())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// The induced encoding sequence over an active subset of lines.
    pub fn restrict(&self, is_active: &[bool]) -> Vec<usize> {
        self.0
            .iter()
            .copied()
            .filter(|&l| is_active.get(l).copied().unwrap_or(false))
            .collect()
    }
}

/// Priority-grouped "shortest lines last" encoding order: all prioritized
/// lines precede the rest, each group sorted by descending line length, ties
/// broken by ascending line index.
pub fn make_order(line_lengths_m: &[f64], partition: &PriorityPartition) -> EncodingOrder {
    assert_eq!(
        line_lengths_m.len(),
        partition.n_lines(),
        "length table and partition disagree on line count"
    );
    let mut idx: Vec<usize> = (0..line_lengths_m.len()).collect();
    idx.sort_by(|&a, &b| {
        let group_a = !partition.is_prioritized(a);
        let group_b = !partition.is_prioritized(b);
        group_a
            .cmp(&group_b)
            .then_with(|| line_lengths_m[b].total_cmp(&line_lengths_m[a]))
            .then_with(|| a.cmp(&b))
    });
    EncodingOrder(idx)
}

/// Set of inactive (tone, line) pairs: no data stream for that user on that
/// tone, though the line can still carry precoding energy for other users.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DisabledSet {
    n_tones: usize,
    n_lines: usize,
    disabled: Vec<bool>,
    count: usize,
}

impl DisabledSet {
    pub fn empty(n_tones: usize, n_lines: usize) -> Self {
        DisabledSet {
            n_tones,
            n_lines,
            disabled: vec![false; n_tones * n_lines],
            count: 0,
        }
    }

    #[inline]
    pub fn n_tones(&self) -> usize {
        self.n_tones
    }

    #[inline]
    pub fn n_lines(&self) -> usize {
        self.n_lines
    }

    /// Marks a pair disabled; returns false if it already was.
    pub fn disable(&mut self, tone: usize, line: usize) -> bool {
        assert!(tone < self.n_tones && line < self.n_lines, "index in range");
        let slot = &mut self.disabled[tone * self.n_lines + line];
        if *slot {
            false
        } else {
            *slot = true;
            self.count += 1;
            true
        }
    }

    /// Disables every tone of one line.
    pub fn disable_line(&mut self, line: usize) {
        for tone in 0..self.n_tones {
            self.disable(tone, line);
        }
    }

    #[inline]
    pub fn is_disabled(&self, tone: usize, line: usize) -> bool {
        self.disabled[tone * self.n_lines + line]
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Active (not disabled) lines on one tone, ascending.
    pub fn active_lines(&self, tone: usize) -> Vec<usize> {
        (0..self.n_lines)
            .filter(|&l| !self.is_disabled(tone, l))
            .collect()
    }

    pub fn active_flags(&self, tone: usize) -> Vec<bool> {
        (0..self.n_lines)
            .map(|l| !self.is_disabled(tone, l))
            .collect()
    }

    pub fn disabled_count_on_tone(&self, tone: usize) -> usize {
        (0..self.n_lines)
            .filter(|&l| self.is_disabled(tone, l))
            .count()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n_lines = self.n_lines;
        self.disabled
            .iter()
            .enumerate()
            .filter(|(_, &d)| d)
            .map(move |(i, _)| (i / n_lines, i % n_lines))
    }
}

/// Structural precoder for one tone: unit-norm columns, effective direct
/// gains per served user, and the map from user-stream powers to per-line
/// transmit powers.
#[derive(Debug, Clone)]
pub struct TonePrecoder {
    /// Column-to-line mapping. For ZF-THP this is the encoding sequence.
    pub users: Vec<usize>,
    /// L x K unit-norm structural columns.
    pub columns: CMatrix,
    /// Effective direct gain per column: received power = g_eff * p.
    pub g_eff: Vec<f64>,
    /// L x K map: transmit power on line j = sum_k load[(j,k)] * p_k.
    pub load: nalgebra::DMatrix<f64>,
    /// Strictly lower feedback filter in encoding order (ZF-THP only).
    pub feedback: Option<CMatrix>,
    /// Scalar receive equalizers per served user.
    pub equalizers: Vec<Complex64>,
}

impl TonePrecoder {
    /// Number of served users on this tone.
    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    /// Explicit transmit matrix for user powers `p` (indexed like `users`):
    /// columns scaled by sqrt(p).
    pub fn scaled_matrix(&self, p: &[f64]) -> CMatrix {
        let mut t = self.columns.clone();
        for (k, &pk) in p.iter().enumerate() {
            let s = pk.max(0.0).sqrt();
            for j in 0..t.nrows() {
                t[(j, k)] *= s;
            }
        }
        t
    }
}

/// Per-tone build outcome.
#[derive(Debug, Clone)]
pub enum ToneState {
    Built(TonePrecoder),
    /// No active lines on this tone.
    Empty,
    /// Active submatrix was numerically rank-deficient for this active set.
    Unusable,
}

impl ToneState {
    pub fn precoder(&self) -> Option<&TonePrecoder> {
        match self {
            ToneState::Built(t) => Some(t),
            _ => None,
        }
    }
}

/// Per-tone precoder structures for a whole band.
#[derive(Debug, Clone)]
pub struct PrecoderStructure {
    pub kind: PrecoderKind,
    pub tones: Vec<ToneState>,
}

impl PrecoderStructure {
    pub fn tone(&self, n: usize) -> Option<&TonePrecoder> {
        self.tones[n].precoder()
    }

    pub fn unusable_tones(&self) -> Vec<usize> {
        self.tones
            .iter()
            .enumerate()
            .filter(|(_, s)| matches!(s, ToneState::Unusable))
            .map(|(n, _)| n)
            .collect()
    }
}

fn active_row_submatrix(h: &CMatrix, active: &[usize]) -> CMatrix {
    let l = h.ncols();
    let mut sub = CMatrix::zeros(active.len(), l);
    for (i, &line) in active.iter().enumerate() {
        for j in 0..l {
            sub[(i, j)] = h[(line, j)];
        }
    }
    sub
}

fn magnitude_squared_map(columns: &CMatrix) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_fn(columns.nrows(), columns.ncols(), |j, k| {
        columns[(j, k)].norm_sqr()
    })
}

fn build_zf_tone(h: &CMatrix, active: Vec<usize>) -> ToneState {
    if active.is_empty() {
        return ToneState::Empty;
    }
    let sub = active_row_submatrix(h, &active);
    let Some(pinv) = right_pseudo_inverse(&sub) else {
        return ToneState::Unusable;
    };
    let k = active.len();
    let mut columns = pinv;
    let mut g_eff = Vec::with_capacity(k);
    let mut equalizers = Vec::with_capacity(k);
    for c in 0..k {
        let norm = columns.column(c).norm();
        if !(norm.is_finite() && norm > 0.0) {
            return ToneState::Unusable;
        }
        for j in 0..columns.nrows() {
            columns[(j, c)] /= Complex64::new(norm, 0.0);
        }
        // h_active[c]^H t_c was 1 before normalization, so it is 1/norm now.
        g_eff.push(1.0 / (norm * norm));
        equalizers.push(Complex64::new(norm, 0.0));
    }
    let load = magnitude_squared_map(&columns);
    ToneState::Built(TonePrecoder {
        users: active,
        columns,
        g_eff,
        load,
        feedback: None,
        equalizers,
    })
}

fn build_zf_thp_tone(h: &CMatrix, sequence: Vec<usize>) -> ToneState {
    if sequence.is_empty() {
        return ToneState::Empty;
    }
    let sub = active_row_submatrix(h, &sequence);
    let Some((q, r)) = ordered_triangular_factor(&sub) else {
        return ToneState::Unusable;
    };
    let k = sequence.len();
    // Effective channel sub * q = r^H is lower triangular in encoding order.
    let mut g_eff = Vec::with_capacity(k);
    let mut equalizers = Vec::with_capacity(k);
    let mut feedback = CMatrix::zeros(k, k);
    for i in 0..k {
        let diag = r[(i, i)].conj();
        g_eff.push(diag.norm_sqr());
        equalizers.push(Complex64::new(1.0, 0.0) / diag);
        for j in 0..i {
            feedback[(i, j)] = r[(j, i)].conj() / diag;
        }
    }
    let load = magnitude_squared_map(&q);
    ToneState::Built(TonePrecoder {
        users: sequence,
        columns: q,
        g_eff,
        load,
        feedback: Some(feedback),
        equalizers,
    })
}

/// Build per-tone ZF precoders for the active complement of `disabled`.
pub fn build_zf(tensor: &ChannelTensor, disabled: &DisabledSet) -> PrecoderStructure {
    let tones = (0..tensor.n_tones())
        .into_par_iter()
        .map(|n| build_zf_tone(tensor.matrix(n), disabled.active_lines(n)))
        .collect();
    PrecoderStructure {
        kind: PrecoderKind::ZfLinear,
        tones,
    }
}

/// Build per-tone ZF-THP precoders for the active complement of `disabled`
/// in the given encoding order.
pub fn build_zf_thp(
    tensor: &ChannelTensor,
    disabled: &DisabledSet,
    order: &EncodingOrder,
) -> PrecoderStructure {
    let tones = (0..tensor.n_tones())
        .into_par_iter()
        .map(|n| build_zf_thp_tone(tensor.matrix(n), order.restrict(&disabled.active_flags(n))))
        .collect();
    PrecoderStructure {
        kind: PrecoderKind::ZfThp,
        tones,
    }
}

/// Build precoders of either kind.
pub fn build_structure(
    tensor: &ChannelTensor,
    kind: PrecoderKind,
    disabled: &DisabledSet,
    order: &EncodingOrder,
) -> PrecoderStructure {
    match kind {
        PrecoderKind::ZfLinear => build_zf(tensor, disabled),
        PrecoderKind::ZfThp => build_zf_thp(tensor, disabled, order),
    }
}

/// Interference-free per-tone rate in bits:
/// `log2(1 + g_eff * p / (gap * sigma2))`.
#[inline]
pub fn rate(g_eff: f64, p_w: f64, gap: SnrGap, sigma2_w: f64) -> f64 {
    debug_assert!(g_eff >= 0.0 && p_w >= 0.0 && sigma2_w > 0.0);
    if p_w <= 0.0 || g_eff <= 0.0 {
        return 0.0;
    }
    (1.0 + g_eff * p_w / (gap.linear() * sigma2_w)).log2()
}

/// Power cap equivalent to the maximum bit loading: `rate(cap) = b_max`.
/// A non-positive `g_eff` marks the tone unusable and yields a zero cap.
#[inline]
pub fn bitcap_to_power_cap(g_eff: f64, gap: SnrGap, sigma2_w: f64, b_max_bits: u32) -> f64 {
    if g_eff <= 0.0 {
        return 0.0;
    }
    gap.linear() * sigma2_w * ((2f64).powi(b_max_bits as i32) - 1.0) / g_eff
}
