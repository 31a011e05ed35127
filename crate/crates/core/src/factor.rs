//! Range factorization `B = U diag(mu) U^H` of the damping operator.
//!
//! `U = W^H Q` where `W` embeds the state into a core space (identity for
//! dense systems, a sparse row-orthonormal map for assembled models) and
//! `Q` holds the eigenvectors of the core matrix with nonzero eigenvalues.
//! Every hot loop of the propagator and of the observability estimator goes
//! through `project`/`lift_add`, so both are written over split real and
//! imaginary buffers.

use crate::spectral::C64;

#[derive(Clone, Debug)]
pub(crate) struct RangeBasis {
    n: usize,
    /// Rows of `W` as (column, coefficient) lists; `None` means `W = I`.
    embed: Option<Vec<Vec<(usize, C64)>>>,
    m: usize,
    rank: usize,
    /// Column-major `m x rank`.
    q_re: Vec<f64>,
    q_im: Option<Vec<f64>>,
    mu: Vec<f64>,
}

/// Scratch buffers sized for one `RangeBasis`.
#[derive(Clone, Debug)]
pub(crate) struct Scratch {
    v_re: Vec<f64>,
    v_im: Vec<f64>,
    pub(crate) c: Vec<C64>,
    pub(crate) dc: Vec<C64>,
}

impl RangeBasis {
    pub(crate) fn new(
        n: usize,
        embed: Option<Vec<Vec<(usize, C64)>>>,
        m: usize,
        q_re: Vec<f64>,
        q_im: Option<Vec<f64>>,
        mu: Vec<f64>,
    ) -> Self {
        let rank = mu.len();
        debug_assert_eq!(q_re.len(), m * rank);
        RangeBasis { n, embed, m, rank, q_re, q_im, mu }
    }

    pub(crate) fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub(crate) fn scratch(&self) -> Scratch {
        Scratch {
            v_re: vec![0.0; self.m],
            v_im: vec![0.0; self.m],
            c: vec![C64::new(0.0, 0.0); self.rank],
            dc: vec![C64::new(0.0, 0.0); self.rank],
        }
    }

    /// `scratch.c = U^H y`.
    pub(crate) fn project(&self, y: &[C64], s: &mut Scratch) {
        debug_assert_eq!(y.len(), self.n);
        match &self.embed {
            None => {
                for (i, z) in y.iter().enumerate() {
                    s.v_re[i] = z.re;
                    s.v_im[i] = z.im;
                }
            }
            Some(rows) => {
                for (i, row) in rows.iter().enumerate() {
                    let mut acc = C64::new(0.0, 0.0);
                    for &(p, w) in row {
                        acc += w * y[p];
                    }
                    s.v_re[i] = acc.re;
                    s.v_im[i] = acc.im;
                }
            }
        }
        let m = self.m;
        for l in 0..self.rank {
            let qr = &self.q_re[l * m..(l + 1) * m];
            let (mut re, mut im) = (0.0, 0.0);
            for i in 0..m {
                re += qr[i] * s.v_re[i];
                im += qr[i] * s.v_im[i];
            }
            if let Some(q_im) = &self.q_im {
                let qi = &q_im[l * m..(l + 1) * m];
                for i in 0..m {
                    re += qi[i] * s.v_im[i];
                    im -= qi[i] * s.v_re[i];
                }
            }
            s.c[l] = C64::new(re, im);
        }
    }

    /// `y += U scratch.dc`.
    pub(crate) fn lift_add(&self, y: &mut [C64], s: &mut Scratch) {
        let m = self.m;
        s.v_re.iter_mut().for_each(|v| *v = 0.0);
        s.v_im.iter_mut().for_each(|v| *v = 0.0);
        for l in 0..self.rank {
            let d = s.dc[l];
            if d.re == 0.0 && d.im == 0.0 {
                continue;
            }
            let qr = &self.q_re[l * m..(l + 1) * m];
            for i in 0..m {
                s.v_re[i] += qr[i] * d.re;
                s.v_im[i] += qr[i] * d.im;
            }
            if let Some(q_im) = &self.q_im {
                let qi = &q_im[l * m..(l + 1) * m];
                for i in 0..m {
                    s.v_re[i] -= qi[i] * d.im;
                    s.v_im[i] += qi[i] * d.re;
                }
            }
        }
        match &self.embed {
            None => {
                for (i, z) in y.iter_mut().enumerate() {
                    *z += C64::new(s.v_re[i], s.v_im[i]);
                }
            }
            Some(rows) => {
                for (i, row) in rows.iter().enumerate() {
                    let dv = C64::new(s.v_re[i], s.v_im[i]);
                    for &(p, w) in row {
                        y[p] += w.conj() * dv;
                    }
                }
            }
        }
    }

    /// `<B y, y>` through the factorization.
    pub(crate) fn quad_form(&self, y: &[C64], s: &mut Scratch) -> f64 {
        self.project(y, s);
        s.c.iter().zip(&self.mu).map(|(c, mu)| mu * c.norm_sqr()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_embedding_round_trip() {
        // Q = rotation by 45 degrees, mu = (2, 1): B = Q diag(mu) Q^T.
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let basis = RangeBasis::new(2, None, 2, vec![h, h, -h, h], None, vec![2.0, 1.0]);
        let mut s = basis.scratch();
        let y = [C64::new(1.0, 0.5), C64::new(-0.25, 2.0)];
        // Dense B = [[1.5, 0.5], [0.5, 1.5]].
        let by0 = 1.5 * y[0] + 0.5 * y[1];
        let by1 = 0.5 * y[0] + 1.5 * y[1];
        let dense = (y[0].conj() * by0 + y[1].conj() * by1).re;
        assert!((basis.quad_form(&y, &mut s) - dense).abs() < 1e-14);

        // lift(project(y)) reproduces y when B has full rank.
        basis.project(&y, &mut s);
        s.dc.copy_from_slice(&s.c.clone());
        let mut z = [C64::new(0.0, 0.0); 2];
        basis.lift_add(&mut z, &mut s);
        for (a, b) in z.iter().zip(&y) {
            assert!((a - b).norm() < 1e-14);
        }
    }
}
