//! Infeasible primal–dual path-following method with Nesterov–Todd scaling
//! and a Mehrotra predictor–corrector.
//!
//! Internally every program is brought to the standard form
//!
//! ```text
//!   min  ⟨C, X⟩ + c_lᵀx + c_fᵀu
//!   s.t. A(X) + A_l x + A_f u = b,   X ⪰ 0, x ≥ 0, u free
//! ```
//!
//! with dual `max bᵀy  s.t.  Aᵀy + Z = C, A_lᵀy + z = c_l, A_fᵀy = c_f`.
//! Hermitian blocks enter as real symmetric blocks of twice the size.

use nalgebra::{DMatrix, DVector};

use super::embed::{embed, extract};
use super::{BlockKind, BlockValue, Coefficient, ConicProgram, ConicSolution, Sense, SolveOptions, Status};
use crate::error::{Error, Result};

/// Coefficient of one constraint on one PSD block.
#[derive(Clone, Debug)]
enum Mat {
    /// s·I
    Ident(f64),
    Dense(DMatrix<f64>),
}

impl Mat {
    fn from_dense(m: DMatrix<f64>) -> Self {
        let n = m.nrows();
        let s = m[(0, 0)];
        let is_ident = (0..n).all(|i| (0..n).all(|j| m[(i, j)] == if i == j { s } else { 0.0 }));
        if is_ident {
            Mat::Ident(s)
        } else {
            Mat::Dense(m)
        }
    }

    fn inner(&self, x: &DMatrix<f64>) -> f64 {
        match self {
            Mat::Ident(s) => s * x.trace(),
            Mat::Dense(a) => a.dot(x),
        }
    }

    fn add_to(&self, scale: f64, out: &mut DMatrix<f64>) {
        match self {
            Mat::Ident(s) => {
                for i in 0..out.nrows() {
                    out[(i, i)] += scale * s;
                }
            }
            Mat::Dense(a) => *out += a * scale,
        }
    }

    fn norm_sq(&self, n: usize) -> f64 {
        match self {
            Mat::Ident(s) => s * s * n as f64,
            Mat::Dense(a) => a.norm_squared(),
        }
    }
}

struct PsdBlock {
    block: usize,
    n: usize,
    hermitian: bool,
    c: DMatrix<f64>,
    rows: Vec<(usize, Mat)>,
}

struct Standard {
    m: usize,
    b: DVector<f64>,
    psd: Vec<PsdBlock>,
    lp_blocks: Vec<usize>,
    lp_a: DMatrix<f64>,
    lp_c: DVector<f64>,
    free_blocks: Vec<usize>,
    free_a: DMatrix<f64>,
    free_c: DVector<f64>,
    /// +1 for minimisation, −1 when the user maximises.
    flip: f64,
    offset: f64,
    n_blocks: usize,
}

enum Slot {
    Psd(usize),
    Lp(usize),
    Free(usize),
}

impl Standard {
    fn compile(p: &ConicProgram) -> Self {
        let flip = match p.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let mut slots = Vec::with_capacity(p.blocks.len());
        let mut psd = Vec::new();
        let mut lp_blocks = Vec::new();
        let mut free_blocks = Vec::new();
        for (k, kind) in p.blocks.iter().enumerate() {
            match *kind {
                BlockKind::Psd(n) => {
                    slots.push(Slot::Psd(psd.len()));
                    psd.push(PsdBlock { block: k, n, hermitian: false, c: DMatrix::zeros(n, n), rows: Vec::new() });
                }
                BlockKind::Hermitian(n) => {
                    slots.push(Slot::Psd(psd.len()));
                    psd.push(PsdBlock {
                        block: k,
                        n: 2 * n,
                        hermitian: true,
                        c: DMatrix::zeros(2 * n, 2 * n),
                        rows: Vec::new(),
                    });
                }
                BlockKind::Nonneg => {
                    slots.push(Slot::Lp(lp_blocks.len()));
                    lp_blocks.push(k);
                }
                BlockKind::Free => {
                    slots.push(Slot::Free(free_blocks.len()));
                    free_blocks.push(k);
                }
            }
        }
        let m = p.equalities.len();
        let mut lp_a = DMatrix::zeros(m, lp_blocks.len());
        let mut lp_c = DVector::zeros(lp_blocks.len());
        let mut free_a = DMatrix::zeros(m, free_blocks.len());
        let mut free_c = DVector::zeros(free_blocks.len());

        let real_coefficient = |c: &Coefficient| -> Option<DMatrix<f64>> {
            match c {
                Coefficient::Symmetric(s) => Some((s + s.transpose()) * 0.5),
                Coefficient::Hermitian(h) => Some(embed(h) * 0.5),
                Coefficient::Scalar(_) => None,
            }
        };

        for (id, c) in &p.objective.terms {
            match (&slots[id.0], c) {
                (Slot::Psd(j), c) => {
                    let r = real_coefficient(c).expect("validated");
                    psd[*j].c += r * flip;
                }
                (Slot::Lp(j), Coefficient::Scalar(v)) => lp_c[*j] += flip * v,
                (Slot::Free(j), Coefficient::Scalar(v)) => free_c[*j] += flip * v,
                _ => unreachable!("validated"),
            }
        }

        // dense accumulation per (row, block), then compress
        let mut acc: Vec<Vec<(usize, DMatrix<f64>)>> = (0..psd.len()).map(|_| Vec::new()).collect();
        for (i, eq) in p.equalities.iter().enumerate() {
            for (id, c) in &eq.form.terms {
                match (&slots[id.0], c) {
                    (Slot::Psd(j), c) => {
                        let r = real_coefficient(c).expect("validated");
                        match acc[*j].last_mut() {
                            Some((row, m)) if *row == i => *m += r,
                            _ => acc[*j].push((i, r)),
                        }
                    }
                    (Slot::Lp(j), Coefficient::Scalar(v)) => lp_a[(i, *j)] += v,
                    (Slot::Free(j), Coefficient::Scalar(v)) => free_a[(i, *j)] += v,
                    _ => unreachable!("validated"),
                }
            }
        }
        for (blk, rows) in psd.iter_mut().zip(acc) {
            blk.rows = rows
                .into_iter()
                .filter(|(_, m)| m.amax() > 0.0)
                .map(|(i, m)| (i, Mat::from_dense(m)))
                .collect();
        }
        let b = DVector::from_iterator(m, p.equalities.iter().map(|e| e.rhs));
        Standard {
            m,
            b,
            psd,
            lp_blocks,
            lp_a,
            lp_c,
            free_blocks,
            free_a,
            free_c,
            flip,
            offset: p.objective_offset,
            n_blocks: p.blocks.len(),
        }
    }

    /// A(X) + A_l x + A_f u
    fn apply(&self, xs: &[DMatrix<f64>], xl: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let mut out = &self.lp_a * xl + &self.free_a * u;
        for (blk, x) in self.psd.iter().zip(xs) {
            for (i, a) in &blk.rows {
                out[*i] += a.inner(x);
            }
        }
        out
    }

    /// Aᵀy restricted to PSD block `k`.
    fn adjoint_block(&self, k: usize, y: &DVector<f64>) -> DMatrix<f64> {
        let blk = &self.psd[k];
        let mut out = DMatrix::zeros(blk.n, blk.n);
        for (i, a) in &blk.rows {
            a.add_to(y[*i], &mut out);
        }
        out
    }

    fn c_norm(&self) -> f64 {
        let mut s = self.lp_c.norm_squared() + self.free_c.norm_squared();
        for blk in &self.psd {
            s += blk.c.norm_squared();
        }
        s.sqrt()
    }
}

struct Iterate {
    x: Vec<DMatrix<f64>>,
    z: Vec<DMatrix<f64>>,
    xl: DVector<f64>,
    zl: DVector<f64>,
    u: DVector<f64>,
    y: DVector<f64>,
}

struct Residuals {
    rp: DVector<f64>,
    rd: Vec<DMatrix<f64>>,
    rdl: DVector<f64>,
    rf: DVector<f64>,
}

impl Residuals {
    fn dual_norm(&self) -> f64 {
        let mut s = self.rdl.norm_squared() + self.rf.norm_squared();
        for r in &self.rd {
            s += r.norm_squared();
        }
        s.sqrt()
    }
}

struct Scaling {
    g: DMatrix<f64>,
    g_inv: DMatrix<f64>,
    d: DVector<f64>,
    w: DMatrix<f64>,
}

fn nt_scaling(x: &DMatrix<f64>, z: &DMatrix<f64>) -> Option<Scaling> {
    let lx = x.clone().cholesky()?.l();
    let lz = z.clone().cholesky()?.l();
    let svd = (lz.transpose() * &lx).svd(true, true);
    let u = svd.u?;
    let v = svd.v_t?.transpose();
    let s = svd.singular_values;
    if s.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return None;
    }
    let inv_sqrt = DMatrix::from_diagonal(&s.map(|v| 1.0 / v.sqrt()));
    let g = &lx * &v * &inv_sqrt;
    let g_inv = &inv_sqrt * u.transpose() * lz.transpose();
    let w = &g * g.transpose();
    Some(Scaling { g, g_inv, d: s, w })
}

/// Largest α with D + α·M ⪰ 0 (infinite if M ⪰ 0).
fn max_step(d: &DVector<f64>, m: &DMatrix<f64>) -> f64 {
    let n = d.len();
    let scaled = DMatrix::from_fn(n, n, |i, j| m[(i, j)] / (d[i] * d[j]).sqrt());
    let sym = (&scaled + scaled.transpose()) * 0.5;
    let lam = sym.symmetric_eigen().eigenvalues.min();
    if lam >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lam
    }
}

fn max_step_lp(x: &DVector<f64>, dx: &DVector<f64>) -> f64 {
    x.iter()
        .zip(dx.iter())
        .filter(|(_, &d)| d < 0.0)
        .map(|(&v, &d)| -v / d)
        .fold(f64::INFINITY, f64::min)
}

struct Direction {
    dx: Vec<DMatrix<f64>>,
    dz: Vec<DMatrix<f64>>,
    dxl: DVector<f64>,
    dzl: DVector<f64>,
    du: DVector<f64>,
    dy: DVector<f64>,
}

enum Kkt {
    Chol(nalgebra::linalg::Cholesky<f64, nalgebra::Dyn>),
    Lu(nalgebra::linalg::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl Kkt {
    fn solve(&self, rhs: &DVector<f64>) -> Option<DVector<f64>> {
        match self {
            Kkt::Chol(c) => Some(c.solve(rhs)),
            Kkt::Lu(l) => l.solve(rhs),
        }
    }
}

struct Stats {
    pobj: f64,
    dobj: f64,
    rel_p: f64,
    rel_d: f64,
    rel_gap: f64,
    abs_gap: f64,
}

pub(super) fn solve(p: &ConicProgram, opts: &SolveOptions) -> Result<ConicSolution> {
    let sf = Standard::compile(p);
    let b_norm = sf.b.norm();
    let c_norm = sf.c_norm();
    let n_cone: usize = sf.psd.iter().map(|b| b.n).sum::<usize>() + sf.lp_blocks.len();

    let mut it = initial_point(&sf, b_norm, c_norm);
    let mut best: Option<(f64, Iterate)> = None;
    let mut status = Status::MaxIterations;
    let mut ray = None;
    let mut iterations = 0;
    let mut best_stats: Option<bool> = None;
    let mut failure: Option<&'static str> = None;

    loop {
        let res = residuals(&sf, &it);
        let st = stats(&sf, &it, &res, b_norm, c_norm);
        let merit = st.rel_p.max(st.rel_d).max(st.rel_gap);
        if best.as_ref().is_none_or(|(bm, _)| merit <= *bm) {
            best = Some((merit, it.clone_state()));
            best_stats = Some(st_accept(&st, opts.tol));
        }
        if st.rel_p <= opts.tol && st.rel_d <= opts.tol && st.rel_gap <= opts.tol && st.abs_gap <= 10.0 * opts.tol {
            status = Status::Optimal;
            best = Some((merit, it.clone_state()));
            break;
        }

        // Farkas rays: bᵀy → +∞ with bounded cone residual certifies primal
        // infeasibility; ⟨C, X⟩ → −∞ with bounded A(X) certifies unboundedness.
        let by = sf.b.dot(&it.y);
        if by > 0.0 {
            let cres = (c_norm + res.dual_norm()) / by;
            if cres < opts.infeasibility_tol {
                status = Status::Infeasible;
                ray = Some(&it.y * (sf.flip / by));
                best = Some((merit, it.clone_state()));
                break;
            }
        }
        if st.pobj < 0.0 {
            let ares = (b_norm + res.rp.norm()) / -st.pobj;
            if ares < opts.infeasibility_tol {
                status = Status::Unbounded;
                best = Some((merit, it.clone_state()));
                break;
            }
        }
        if iterations >= opts.max_iters {
            break;
        }
        iterations += 1;

        let scalings: Vec<Scaling> = match it
            .x
            .iter()
            .zip(&it.z)
            .map(|(x, z)| nt_scaling(x, z))
            .collect::<Option<Vec<_>>>()
        {
            Some(s) => s,
            None => {
                failure = Some("NT scaling lost definiteness");
                break;
            }
        };
        let wl: DVector<f64> = it.xl.component_div(&it.zl);
        let kkt = match assemble_kkt(&sf, &scalings, &wl) {
            Some(k) => k,
            None => {
                failure = Some("singular Schur complement");
                break;
            }
        };

        let mu = complementarity(&it) / n_cone.max(1) as f64;

        // predictor
        let pred_r: Vec<DMatrix<f64>> = it.x.iter().map(|x| -x).collect();
        let pred_rl: DVector<f64> = -&it.xl;
        let Some(pred) = direction(&sf, &res, &scalings, &wl, &kkt, &pred_r, &pred_rl) else {
            failure = Some("predictor solve failed");
            break;
        };
        let (ap, ad) = step_lengths(&it, &scalings, &pred);
        let ap = ap.min(1.0);
        let ad = ad.min(1.0);
        let mu_aff = {
            let mut s = 0.0;
            for k in 0..it.x.len() {
                let xa = &it.x[k] + &pred.dx[k] * ap;
                let za = &it.z[k] + &pred.dz[k] * ad;
                s += xa.dot(&za);
            }
            let xl = &it.xl + &pred.dxl * ap;
            let zl = &it.zl + &pred.dzl * ad;
            (s + xl.dot(&zl)) / n_cone.max(1) as f64
        };
        let sigma = if mu > 0.0 { (mu_aff / mu).clamp(0.0, 1.0).powi(3) } else { 0.0 };

        // corrector
        let mut corr_r = Vec::with_capacity(scalings.len());
        for (k, sc) in scalings.iter().enumerate() {
            let dxt = &sc.g_inv * &pred.dx[k] * sc.g_inv.transpose();
            let dzt = sc.g.transpose() * &pred.dz[k] * &sc.g;
            let cross = &dxt * &dzt;
            let sym = (&cross + cross.transpose()) * 0.5;
            let n = sc.d.len();
            let q = DMatrix::from_fn(n, n, |i, j| {
                let r = if i == j { sigma * mu - sc.d[i] * sc.d[i] } else { 0.0 } - sym[(i, j)];
                2.0 * r / (sc.d[i] + sc.d[j])
            });
            corr_r.push(&sc.g * q * sc.g.transpose());
        }
        let corr_rl = DVector::from_fn(it.xl.len(), |i, _| {
            (sigma * mu - it.xl[i] * it.zl[i] - pred.dxl[i] * pred.dzl[i]) / it.zl[i]
        });
        let Some(dir) = direction(&sf, &res, &scalings, &wl, &kkt, &corr_r, &corr_rl) else {
            failure = Some("corrector solve failed");
            break;
        };
        let (ap, ad) = step_lengths(&it, &scalings, &dir);
        let gamma = 0.9 + 0.09 * ap.min(ad).min(1.0);
        let ap = (gamma * ap).min(1.0);
        let ad = (gamma * ad).min(1.0);

        for k in 0..it.x.len() {
            it.x[k] += &dir.dx[k] * ap;
            it.x[k] = symmetrize(&it.x[k]);
            it.z[k] += &dir.dz[k] * ad;
            it.z[k] = symmetrize(&it.z[k]);
        }
        it.xl += &dir.dxl * ap;
        it.u += &dir.du * ap;
        it.zl += &dir.dzl * ad;
        it.y += &dir.dy * ad;
        if !it.is_finite() {
            failure = Some("non-finite iterate");
            break;
        }
    }

    // A stalled run whose best iterate already meets the residual
    // tolerances and a slightly looser gap is accepted.
    if status == Status::MaxIterations && best_stats == Some(true) {
        status = Status::Optimal;
    } else if let Some(why) = failure {
        return numerical_failure(iterations, why);
    }

    let (_, it) = best.expect("at least one iterate");
    Ok(finish(&sf, &it, status, iterations, ray, b_norm, c_norm))
}

fn st_accept(st: &Stats, tol: f64) -> bool {
    st.rel_p <= tol && st.rel_d <= tol && st.rel_gap <= 10.0 * tol && st.abs_gap <= 10.0 * tol
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

impl Iterate {
    fn clone_state(&self) -> Iterate {
        Iterate {
            x: self.x.clone(),
            z: self.z.clone(),
            xl: self.xl.clone(),
            zl: self.zl.clone(),
            u: self.u.clone(),
            y: self.y.clone(),
        }
    }

    fn is_finite(&self) -> bool {
        let mats = self.x.iter().chain(&self.z).all(|m| m.iter().all(|v| v.is_finite()));
        mats && [&self.xl, &self.zl, &self.u, &self.y]
            .iter()
            .all(|v| v.iter().all(|x| x.is_finite()))
    }
}

fn initial_point(sf: &Standard, b_norm: f64, c_norm: f64) -> Iterate {
    let mut x = Vec::with_capacity(sf.psd.len());
    let mut z = Vec::with_capacity(sf.psd.len());
    for blk in &sf.psd {
        let n = blk.n as f64;
        let mut xi: f64 = 10f64.max(n.sqrt());
        let mut zeta: f64 = 10f64.max(n.sqrt()).max(blk.c.norm());
        for (i, a) in &blk.rows {
            let an = a.norm_sq(blk.n).sqrt();
            xi = xi.max(n * (1.0 + sf.b[*i].abs()) / (1.0 + an));
            zeta = zeta.max(an);
        }
        x.push(DMatrix::identity(blk.n, blk.n) * xi);
        z.push(DMatrix::identity(blk.n, blk.n) * zeta);
    }
    let nl = sf.lp_blocks.len();
    let mut xl = DVector::zeros(nl);
    let mut zl = DVector::zeros(nl);
    for j in 0..nl {
        let col = sf.lp_a.column(j);
        let an = col.norm();
        let mut xi: f64 = 10.0;
        for i in 0..sf.m {
            if col[i] != 0.0 {
                xi = xi.max((1.0 + sf.b[i].abs()) / (1.0 + an));
            }
        }
        xl[j] = xi.max(1.0 + b_norm);
        zl[j] = 10f64.max(an).max(sf.lp_c[j].abs()).max(1.0 + c_norm);
    }
    Iterate {
        x,
        z,
        xl,
        zl,
        u: DVector::zeros(sf.free_blocks.len()),
        y: DVector::zeros(sf.m),
    }
}

fn residuals(sf: &Standard, it: &Iterate) -> Residuals {
    let rp = &sf.b - sf.apply(&it.x, &it.xl, &it.u);
    let rd = (0..sf.psd.len())
        .map(|k| &sf.psd[k].c - &it.z[k] - sf.adjoint_block(k, &it.y))
        .collect();
    let rdl = &sf.lp_c - &it.zl - sf.lp_a.tr_mul(&it.y);
    let rf = &sf.free_c - sf.free_a.tr_mul(&it.y);
    Residuals { rp, rd, rdl, rf }
}

fn complementarity(it: &Iterate) -> f64 {
    it.x.iter().zip(&it.z).map(|(x, z)| x.dot(z)).sum::<f64>() + it.xl.dot(&it.zl)
}

fn primal_objective(sf: &Standard, it: &Iterate) -> f64 {
    sf.psd.iter().zip(&it.x).map(|(b, x)| b.c.dot(x)).sum::<f64>()
        + sf.lp_c.dot(&it.xl)
        + sf.free_c.dot(&it.u)
}

fn stats(sf: &Standard, it: &Iterate, res: &Residuals, b_norm: f64, c_norm: f64) -> Stats {
    let pobj = primal_objective(sf, it);
    let dobj = sf.b.dot(&it.y);
    let compl = complementarity(it);
    let denom = 1.0 + pobj.abs() + dobj.abs();
    Stats {
        pobj,
        dobj,
        rel_p: res.rp.norm() / (1.0 + b_norm),
        rel_d: res.dual_norm() / (1.0 + c_norm),
        rel_gap: (pobj - dobj).abs().max(compl.abs()) / denom,
        abs_gap: (pobj - dobj).abs().max(compl.abs()),
    }
}

fn assemble_kkt(sf: &Standard, scalings: &[Scaling], wl: &DVector<f64>) -> Option<Kkt> {
    let m = sf.m;
    let mut schur = DMatrix::<f64>::zeros(m, m);
    for (blk, sc) in sf.psd.iter().zip(scalings) {
        if blk.rows.is_empty() {
            continue;
        }
        let w2_trace = sc.w.norm_squared();
        let mut cache: Vec<Option<DMatrix<f64>>> = Vec::with_capacity(blk.rows.len());
        for (_, a) in &blk.rows {
            cache.push(match a {
                Mat::Ident(_) => None,
                Mat::Dense(a) => Some(&sc.w * a * &sc.w),
            });
        }
        for (q, (j, aj)) in blk.rows.iter().enumerate() {
            for (i, ai) in &blk.rows {
                let v = match (ai, aj, &cache[q]) {
                    (Mat::Ident(si), Mat::Ident(sj), _) => si * sj * w2_trace,
                    (Mat::Ident(si), Mat::Dense(_), Some(waw)) => si * waw.trace(),
                    (ai, Mat::Dense(_), Some(waw)) => ai.inner(waw),
                    (Mat::Dense(a), Mat::Ident(sj), None) => sj * (&sc.w * a).dot(&sc.w),
                    _ => unreachable!(),
                };
                schur[(*i, *j)] += v;
            }
        }
    }
    if !sf.lp_blocks.is_empty() {
        let scaled = DMatrix::from_fn(m, sf.lp_blocks.len(), |i, j| sf.lp_a[(i, j)] * wl[j]);
        schur += &scaled * sf.lp_a.transpose();
    }
    let schur = symmetrize(&schur);
    let nf = sf.free_blocks.len();
    if nf == 0 {
        if let Some(c) = schur.clone().cholesky() {
            return Some(Kkt::Chol(c));
        }
        // Near a degenerate face the Schur complement loses definiteness
        // numerically; a small diagonal shift keeps the step usable.
        let scale = schur.diagonal().amax().max(1.0);
        let mut shift = 1e-14 * scale;
        while shift <= 1e-6 * scale {
            let mut reg = schur.clone();
            for i in 0..m {
                reg[(i, i)] += shift;
            }
            if let Some(c) = reg.cholesky() {
                return Some(Kkt::Chol(c));
            }
            shift *= 100.0;
        }
        let lu = schur.lu();
        return if lu.is_invertible() { Some(Kkt::Lu(lu)) } else { None };
    }
    let mut k = DMatrix::zeros(m + nf, m + nf);
    k.view_mut((0, 0), (m, m)).copy_from(&schur);
    k.view_mut((0, m), (m, nf)).copy_from(&sf.free_a);
    k.view_mut((m, 0), (nf, m)).copy_from(&sf.free_a.transpose());
    let lu = k.lu();
    if lu.is_invertible() {
        Some(Kkt::Lu(lu))
    } else {
        None
    }
}

/// Solves the Newton system for a given complementarity right-hand side
/// `r_hat` (PSD blocks, already mapped back from the scaled space) and
/// `r_hat_l` (LP part).
#[allow(clippy::too_many_arguments)]
fn direction(
    sf: &Standard,
    res: &Residuals,
    scalings: &[Scaling],
    wl: &DVector<f64>,
    kkt: &Kkt,
    r_hat: &[DMatrix<f64>],
    r_hat_l: &DVector<f64>,
) -> Option<Direction> {
    let m = sf.m;
    // h = rp − A(R̂ − W Rd W) − A_l(r̂_l − w∘rd_l)
    let inner: Vec<DMatrix<f64>> = scalings
        .iter()
        .enumerate()
        .map(|(k, sc)| &r_hat[k] - &sc.w * &res.rd[k] * &sc.w)
        .collect();
    let inner_l = r_hat_l - wl.component_mul(&res.rdl);
    let zero_u = DVector::zeros(sf.free_blocks.len());
    let h = &res.rp - sf.apply(&inner, &inner_l, &zero_u);
    let nf = sf.free_blocks.len();
    let mut rhs = DVector::zeros(m + nf);
    rhs.rows_mut(0, m).copy_from(&h);
    rhs.rows_mut(m, nf).copy_from(&res.rf);
    let sol = kkt.solve(&rhs)?;
    let dy = sol.rows(0, m).into_owned();
    let du = sol.rows(m, nf).into_owned();

    let mut dx = Vec::with_capacity(scalings.len());
    let mut dz = Vec::with_capacity(scalings.len());
    for (k, sc) in scalings.iter().enumerate() {
        let dzk = &res.rd[k] - sf.adjoint_block(k, &dy);
        let dxk = &r_hat[k] - &sc.w * &dzk * &sc.w;
        dx.push(symmetrize(&dxk));
        dz.push(symmetrize(&dzk));
    }
    let dzl = &res.rdl - sf.lp_a.tr_mul(&dy);
    let dxl = r_hat_l - wl.component_mul(&dzl);
    Some(Direction { dx, dz, dxl, dzl, du, dy })
}

fn step_lengths(it: &Iterate, scalings: &[Scaling], dir: &Direction) -> (f64, f64) {
    let mut ap = f64::INFINITY;
    let mut ad = f64::INFINITY;
    for (k, sc) in scalings.iter().enumerate() {
        let dxt = &sc.g_inv * &dir.dx[k] * sc.g_inv.transpose();
        let dzt = sc.g.transpose() * &dir.dz[k] * &sc.g;
        ap = ap.min(max_step(&sc.d, &dxt));
        ad = ad.min(max_step(&sc.d, &dzt));
    }
    ap = ap.min(max_step_lp(&it.xl, &dir.dxl));
    ad = ad.min(max_step_lp(&it.zl, &dir.dzl));
    (ap, ad)
}

fn numerical_failure(iterations: usize, why: &str) -> Result<ConicSolution> {
    Err(Error::Solver(format!("numerical failure after {iterations} iterations: {why}")))
}

fn finish(
    sf: &Standard,
    it: &Iterate,
    status: Status,
    iterations: usize,
    ray: Option<DVector<f64>>,
    b_norm: f64,
    c_norm: f64,
) -> ConicSolution {
    let res = residuals(sf, it);
    let st = stats(sf, it, &res, b_norm, c_norm);
    let mut primal = vec![BlockValue::Scalar(0.0); sf.n_blocks];
    let mut slack = vec![BlockValue::Scalar(0.0); sf.n_blocks];
    for (k, blk) in sf.psd.iter().enumerate() {
        if blk.hermitian {
            primal[blk.block] = BlockValue::Hermitian(extract(&it.x[k]));
            slack[blk.block] = BlockValue::Hermitian(extract(&(&it.z[k] * 2.0)));
        } else {
            primal[blk.block] = BlockValue::Symmetric(it.x[k].clone());
            slack[blk.block] = BlockValue::Symmetric(it.z[k].clone());
        }
    }
    for (j, &b) in sf.lp_blocks.iter().enumerate() {
        primal[b] = BlockValue::Scalar(it.xl[j]);
        slack[b] = BlockValue::Scalar(it.zl[j]);
    }
    for (j, &b) in sf.free_blocks.iter().enumerate() {
        primal[b] = BlockValue::Scalar(it.u[j]);
    }
    let value = sf.flip * st.pobj + sf.offset;
    let dual_value = sf.flip * st.dobj + sf.offset;
    ConicSolution {
        status,
        value,
        dual_value,
        primal,
        dual: (&it.y * sf.flip).iter().copied().collect(),
        slack,
        gap: (value - dual_value).abs(),
        primal_residual: st.rel_p,
        dual_residual: st.rel_d,
        iterations,
        ray,
    }
}
