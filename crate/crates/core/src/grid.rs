/// Dense tone-by-line table of `f64` values, row-major with the tone index
/// varying slowest. Used for power allocations, per-tone rates, masks and
/// noise variances.
#[derive(Debug, Clone, PartialEq)]
pub struct ToneGrid {
    n_tones: usize,
    n_lines: usize,
    data: Vec<f64>,
}

impl ToneGrid {
    pub fn filled(n_tones: usize, n_lines: usize, value: f64) -> Self {
        ToneGrid {
            n_tones,
            n_lines,
            data: vec![value; n_tones * n_lines],
        }
    }

    pub fn zeros(n_tones: usize, n_lines: usize) -> Self {
        Self::filled(n_tones, n_lines, 0.0)
    }

    pub fn from_fn(n_tones: usize, n_lines: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut g = Self::zeros(n_tones, n_lines);
        for n in 0..n_tones {
            for l in 0..n_lines {
                g.set(n, l, f(n, l));
            }
        }
        g
    }

    pub fn from_raw(n_tones: usize, n_lines: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n_tones * n_lines, "raw grid length mismatch");
        ToneGrid {
            n_tones,
            n_lines,
            data,
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

    #[inline]
    pub fn get(&self, tone: usize, line: usize) -> f64 {
        self.data[tone * self.n_lines + line]
    }

    #[inline]
    pub fn set(&mut self, tone: usize, line: usize, value: f64) {
        self.data[tone * self.n_lines + line] = value;
    }

    #[inline]
    pub fn row(&self, tone: usize) -> &[f64] {
        &self.data[tone * self.n_lines..(tone + 1) * self.n_lines]
    }

    #[inline]
    pub fn row_mut(&mut self, tone: usize) -> &mut [f64] {
        &mut self.data[tone * self.n_lines..(tone + 1) * self.n_lines]
    }

    /// Sum over all tones for one line.
    pub fn line_sum(&self, line: usize) -> f64 {
        (0..self.n_tones).map(|n| self.get(n, line)).sum()
    }

    /// Per-line sums over all tones.
    pub fn line_sums(&self) -> Vec<f64> {
        (0..self.n_lines).map(|l| self.line_sum(l)).collect()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.data {
            *v *= factor;
        }
    }
}
