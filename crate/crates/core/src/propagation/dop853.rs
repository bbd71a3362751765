//! Dormand–Prince 8(5,3) embedded Runge–Kutta pair on complex state vectors.
//!
//! Steps are clipped so that every requested output time is hit exactly; no
//! dense-output interpolation is involved.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// A first-order system `y' = f(t, y)` over a flat complex state.
pub trait OdeSystem {
    fn rhs(&self, t: f64, y: &[Complex64], dy: &mut [Complex64]) -> Result<()>;

    /// Upper bound on the next step size, if any.
    fn max_step(&self, _t: f64, _y: &[Complex64]) -> Result<Option<f64>> {
        Ok(None)
    }

    /// Called after every accepted step; may modify the state in place and
    /// returns the size of the correction it applied.
    fn project(&self, _y: &mut [Complex64]) -> f64 {
        0.0
    }

    /// Called after every accepted step (post-projection). An error stops the
    /// integration early and is reported in [`Trajectory::stopped`].
    fn check(&self, _t: f64, _y: &[Complex64]) -> Result<()> {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub h_init: Option<f64>,
}

impl IntegratorOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            rtol: tol,
            atol: tol,
            ..Self::default()
        }
    }
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-10,
            max_steps: 20_000_000,
            h_init: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IntegratorStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// States at the requested output times.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<Complex64>>,
    /// Largest projection correction applied since the previous output.
    pub corrections: Vec<f64>,
    /// Early stop raised by [`OdeSystem::check`]: time and reason.
    pub stopped: Option<(f64, Error)>,
    pub stats: IntegratorStats,
}

const SAFE: f64 = 0.9;
const FAC_MIN: f64 = 0.333;
const FAC_MAX: f64 = 6.0;
const EXPO: f64 = 1.0 / 8.0;

/// Integrates `sys` from `grid[0]` with initial state `y0`, recording the
/// state at every grid point. Fails with [`Error::IntegratorFailure`] on
/// step-size underflow, non-finite states or exhausted step budget.
pub fn integrate<S: OdeSystem + ?Sized>(
    sys: &S,
    grid: &[f64],
    y0: Vec<Complex64>,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    crate::operator::check_grid(grid)?;
    if !(opts.rtol > 0.0 && opts.atol > 0.0) {
        return Err(Error::InvalidArgument(
            "integrator tolerances must be positive".into(),
        ));
    }
    let n = y0.len();
    let mut out = Trajectory {
        times: vec![grid[0]],
        states: vec![y0.clone()],
        corrections: vec![0.0],
        stopped: None,
        stats: IntegratorStats::default(),
    };
    if grid.len() == 1 || n == 0 {
        for &t in &grid[1..] {
            out.times.push(t);
            out.states.push(y0.clone());
            out.corrections.push(0.0);
        }
        return Ok(out);
    }

    let zero = Complex64::new(0.0, 0.0);
    let mut k: Vec<Vec<Complex64>> = vec![vec![zero; n]; 12];
    let mut tmp = vec![zero; n];
    let mut y_new = vec![zero; n];

    let mut t = grid[0];
    let mut y = y0;
    sys.rhs(t, &y, &mut k[0])?;
    out.stats.evaluations += 1;

    let span = grid[grid.len() - 1] - grid[0];
    let mut h = match opts.h_init {
        Some(h) => h,
        None => initial_step(sys, t, &y, &k[0], span, opts, &mut tmp)?,
    };
    out.stats.evaluations += 1;
    let mut last_rejected = false;
    let mut max_correction: f64 = 0.0;
    let mut next = 1;

    while next < grid.len() {
        if out.stats.accepted + out.stats.rejected >= opts.max_steps {
            return Err(Error::IntegratorFailure {
                t,
                reason: format!("step budget of {} exhausted", opts.max_steps),
            });
        }
        if let Some(cap) = sys.max_step(t, &y)? {
            h = h.min(cap);
        }
        let target = grid[next];
        let remaining = target - t;
        let lands = 1.01 * h >= remaining;
        let step = if lands { remaining } else { h };
        if !(step > 1e-14 * t.abs().max(1.0)) && !lands {
            return Err(Error::IntegratorFailure {
                t,
                reason: format!("step size underflow (h = {step:.3e})"),
            });
        }

        stages(sys, t, step, &y, &mut k, &mut tmp)?;
        out.stats.evaluations += 11;

        // k[3] <- 8th-order increment, y_new <- y + h * increment
        for i in 0..n {
            let inc = B1 * k[0][i]
                + B6 * k[5][i]
                + B7 * k[6][i]
                + B8 * k[7][i]
                + B9 * k[8][i]
                + B10 * k[9][i]
                + B11 * k[10][i]
                + B12 * k[11][i];
            k[3][i] = inc;
            y_new[i] = y[i] + inc * step;
        }

        let mut err = 0.0;
        let mut err2 = 0.0;
        for i in 0..n {
            let sk = opts.atol + opts.rtol * y[i].norm().max(y_new[i].norm());
            let e2 = k[3][i] - BHH1 * k[0][i] - BHH2 * k[8][i] - BHH3 * k[11][i];
            err2 += (e2.norm() / sk).powi(2);
            let e = ER1 * k[0][i]
                + ER6 * k[5][i]
                + ER7 * k[6][i]
                + ER8 * k[7][i]
                + ER9 * k[8][i]
                + ER10 * k[9][i]
                + ER11 * k[10][i]
                + ER12 * k[11][i];
            err += (e.norm() / sk).powi(2);
        }
        let mut deno = err + 0.01 * err2;
        if deno <= 0.0 {
            deno = 1.0;
        }
        let err = step.abs() * err * (1.0 / (deno * n as f64)).sqrt();
        if !err.is_finite() {
            return Err(Error::IntegratorFailure {
                t,
                reason: "non-finite error estimate".into(),
            });
        }

        let fac11 = err.powf(EXPO);
        let fac = (fac11 / SAFE).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
        let mut h_new = step / fac;

        if err <= 1.0 {
            out.stats.accepted += 1;
            t = if lands { target } else { t + step };
            std::mem::swap(&mut y, &mut y_new);
            let corr = sys.project(&mut y);
            max_correction = max_correction.max(corr);
            if y.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
                return Err(Error::IntegratorFailure {
                    t,
                    reason: "non-finite state".into(),
                });
            }
            let checked = sys.check(t, &y);
            if lands || checked.is_err() {
                out.times.push(t);
                out.states.push(y.clone());
                out.corrections.push(max_correction);
                max_correction = 0.0;
                if lands {
                    next += 1;
                }
            }
            if let Err(e) = checked {
                out.stopped = Some((t, e));
                return Ok(out);
            }
            sys.rhs(t, &y, &mut k[0])?;
            out.stats.evaluations += 1;
            if last_rejected {
                h_new = h_new.min(step);
            }
            last_rejected = false;
            h = if lands { h_new.max(h) } else { h_new };
        } else {
            h = step / (1.0 / FAC_MIN).min(fac11 / SAFE);
            last_rejected = true;
            out.stats.rejected += 1;
        }
    }
    Ok(out)
}

fn initial_step<S: OdeSystem + ?Sized>(
    sys: &S,
    t: f64,
    y: &[Complex64],
    f0: &[Complex64],
    span: f64,
    opts: &IntegratorOptions,
    tmp: &mut [Complex64],
) -> Result<f64> {
    let n = y.len() as f64;
    let mut dnf = 0.0;
    let mut dny = 0.0;
    for (yi, fi) in y.iter().zip(f0) {
        let sk = opts.atol + opts.rtol * yi.norm();
        dnf += (fi.norm() / sk).powi(2);
        dny += (yi.norm() / sk).powi(2);
    }
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
        1e-6
    } else {
        (dny / dnf).sqrt() * 0.01
    };
    h = h.min(span);
    let probe: Vec<Complex64> = y.iter().zip(f0).map(|(a, b)| a + b * h).collect();
    sys.rhs(t + h, &probe, tmp)?;
    let mut der2 = 0.0;
    for ((yi, fi), gi) in y.iter().zip(f0).zip(tmp.iter()) {
        let sk = opts.atol + opts.rtol * yi.norm();
        der2 += ((gi - fi).norm() / sk).powi(2);
    }
    let der2 = der2.sqrt() / h;
    let der12 = der2.max((dnf / n).sqrt().max(dnf.sqrt()));
    let h1 = if der12 <= 1e-15 {
        (h * 1e-3).max(1e-6)
    } else {
        (0.01 / der12).powf(1.0 / 8.0)
    };
    Ok((100.0 * h).min(h1).min(span))
}

/// Evaluates stages 2..=12 into `k[1..]` (stage 11 in `k[10]`, stage 12 in
/// `k[11]`); `k[0]` must hold `f(t, y)`.
fn stages<S: OdeSystem + ?Sized>(
    sys: &S,
    t: f64,
    h: f64,
    y: &[Complex64],
    k: &mut [Vec<Complex64>],
    tmp: &mut Vec<Complex64>,
) -> Result<()> {
    let rows: [(f64, &[(usize, f64)]); 11] = [
        (C2, &[(0, A21)]),
        (C3, &[(0, A31), (1, A32)]),
        (C4, &[(0, A41), (2, A43)]),
        (C5, &[(0, A51), (2, A53), (3, A54)]),
        (C6, &[(0, A61), (3, A64), (4, A65)]),
        (C7, &[(0, A71), (3, A74), (4, A75), (5, A76)]),
        (C8, &[(0, A81), (3, A84), (4, A85), (5, A86), (6, A87)]),
        (
            C9,
            &[(0, A91), (3, A94), (4, A95), (5, A96), (6, A97), (7, A98)],
        ),
        (
            C10,
            &[
                (0, A101),
                (3, A104),
                (4, A105),
                (5, A106),
                (6, A107),
                (7, A108),
                (8, A109),
            ],
        ),
        (
            C11,
            &[
                (0, A111),
                (3, A114),
                (4, A115),
                (5, A116),
                (6, A117),
                (7, A118),
                (8, A119),
                (9, A1110),
            ],
        ),
        (
            1.0,
            &[
                (0, A121),
                (3, A124),
                (4, A125),
                (5, A126),
                (6, A127),
                (7, A128),
                (8, A129),
                (9, A1210),
                (10, A1211),
            ],
        ),
    ];
    for (stage, (ci, coeffs)) in rows.iter().enumerate() {
        tmp.copy_from_slice(y);
        for &(j, a) in coeffs.iter() {
            let ha = h * a;
            for (dst, kj) in tmp.iter_mut().zip(&k[j]) {
                *dst += kj * ha;
            }
        }
        let (_, rest) = k.split_at_mut(stage + 1);
        sys.rhs(t + ci * h, tmp, &mut rest[0])?;
    }
    Ok(())
}

// Dormand–Prince 8(5,3) coefficients (Hairer, Nørsett & Wanner).
const C2: f64 = 0.526001519587677318785587544488E-01;
const C3: f64 = 0.789002279381515978178381316732E-01;
const C4: f64 = 0.118350341907227396726757197510E+00;
const C5: f64 = 0.281649658092772603273242802490E+00;
const C6: f64 = 0.333333333333333333333333333333E+00;
const C7: f64 = 0.25E+00;
const C8: f64 = 0.307692307692307692307692307692E+00;
const C9: f64 = 0.651282051282051282051282051282E+00;
const C10: f64 = 0.6E+00;
const C11: f64 = 0.857142857142857142857142857142E+00;

const A21: f64 = 5.26001519587677318785587544488E-2;
const A31: f64 = 1.97250569845378994544595329183E-2;
const A32: f64 = 5.91751709536136983633785987549E-2;
const A41: f64 = 2.95875854768068491816892993775E-2;
const A43: f64 = 8.87627564304205475450678981324E-2;
const A51: f64 = 2.41365134159266685502369798665E-1;
const A53: f64 = -8.84549479328286085344864962717E-1;
const A54: f64 = 9.24834003261792003115737966543E-1;
const A61: f64 = 3.7037037037037037037037037037E-2;
const A64: f64 = 1.70828608729473871279604482173E-1;
const A65: f64 = 1.25467687566822425016691814123E-1;
const A71: f64 = 3.7109375E-2;
const A74: f64 = 1.70252211019544039314978060272E-1;
const A75: f64 = 6.02165389804559606850219397283E-2;
const A76: f64 = -1.7578125E-2;
const A81: f64 = 3.70920001185047927108779319836E-2;
const A84: f64 = 1.70383925712239993810214054705E-1;
const A85: f64 = 1.07262030446373284651809199168E-1;
const A86: f64 = -1.53194377486244017527936158236E-2;
const A87: f64 = 8.27378916381402288758473766002E-3;
const A91: f64 = 6.24110958716075717114429577812E-1;
const A94: f64 = -3.36089262944694129406857109825E0;
const A95: f64 = -8.68219346841726006818189891453E-1;
const A96: f64 = 2.75920996994467083049415600797E1;
const A97: f64 = 2.01540675504778934086186788979E1;
const A98: f64 = -4.34898841810699588477366255144E1;
const A101: f64 = 4.77662536438264365890433908527E-1;
const A104: f64 = -2.48811461997166764192642586468E0;
const A105: f64 = -5.90290826836842996371446475743E-1;
const A106: f64 = 2.12300514481811942347288949897E1;
const A107: f64 = 1.52792336328824235832596922938E1;
const A108: f64 = -3.32882109689848629194453265587E1;
const A109: f64 = -2.03312017085086261358222928593E-2;
const A111: f64 = -9.3714243008598732571704021658E-1;
const A114: f64 = 5.18637242884406370830023853209E0;
const A115: f64 = 1.09143734899672957818500254654E0;
const A116: f64 = -8.14978701074692612513997267357E0;
const A117: f64 = -1.85200656599969598641566180701E1;
const A118: f64 = 2.27394870993505042818970056734E1;
const A119: f64 = 2.49360555267965238987089396762E0;
const A1110: f64 = -3.0467644718982195003823669022E0;
const A121: f64 = 2.27331014751653820792359768449E0;
const A124: f64 = -1.05344954667372501984066689879E1;
const A125: f64 = -2.00087205822486249909675718444E0;
const A126: f64 = -1.79589318631187989172765950534E1;
const A127: f64 = 2.79488845294199600508499808837E1;
const A128: f64 = -2.85899827713502369474065508674E0;
const A129: f64 = -8.87285693353062954433549289258E0;
const A1210: f64 = 1.23605671757943030647266201528E1;
const A1211: f64 = 6.43392746015763530355970484046E-1;

const B1: f64 = 5.42937341165687622380535766363E-2;
const B6: f64 = 4.45031289275240888144113950566E0;
const B7: f64 = 1.89151789931450038304281599044E0;
const B8: f64 = -5.8012039600105847814672114227E0;
const B9: f64 = 3.1116436695781989440891606237E-1;
const B10: f64 = -1.52160949662516078556178806805E-1;
const B11: f64 = 2.01365400804030348374776537501E-1;
const B12: f64 = 4.47106157277725905176885569043E-2;

const BHH1: f64 = 0.244094488188976377952755905512E+00;
const BHH2: f64 = 0.733846688281611857341361741547E+00;
const BHH3: f64 = 0.220588235294117647058823529412E-01;

const ER1: f64 = 0.1312004499419488073250102996E-01;
const ER6: f64 = -0.1225156446376204440720569753E+01;
const ER7: f64 = -0.4957589496572501915214079952E+00;
const ER8: f64 = 0.1664377182454986536961530415E+01;
const ER9: f64 = -0.3503288487499736816886487290E+00;
const ER10: f64 = 0.3341791187130174790297318841E+00;
const ER11: f64 = 0.8192320648511571246570742613E-01;
const ER12: f64 = -0.2235530786388629525884427845E-01;

#[cfg(test)]
mod tests {
    use super::*;

    /// y' = λ y with complex λ.
    struct Exp(Complex64);

    impl OdeSystem for Exp {
        fn rhs(&self, _t: f64, y: &[Complex64], dy: &mut [Complex64]) -> Result<()> {
            dy[0] = self.0 * y[0];
            Ok(())
        }
    }

    #[test]
    fn scalar_oscillator_high_accuracy() {
        let lambda = Complex64::new(-0.1, 3.0);
        let grid: Vec<f64> = (0..=10).map(|i| i as f64).collect();
        let traj = integrate(
            &Exp(lambda),
            &grid,
            vec![Complex64::new(1.0, 0.0)],
            &IntegratorOptions::with_tol(1e-12),
        )
        .unwrap();
        assert_eq!(traj.times, grid);
        for (t, y) in traj.times.iter().zip(&traj.states) {
            let exact = (lambda * t).exp();
            assert!((y[0] - exact).norm() < 1e-10, "t={t}");
        }
    }

    #[test]
    fn eighth_order_convergence() {
        // Error should fall sharply as the tolerance tightens.
        let lambda = Complex64::new(0.0, 5.0);
        let grid = [0.0, 7.0];
        let err = |tol: f64| {
            let traj = integrate(
                &Exp(lambda),
                &grid,
                vec![Complex64::new(1.0, 0.0)],
                &IntegratorOptions::with_tol(tol),
            )
            .unwrap();
            (traj.states[1][0] - (lambda * 7.0).exp()).norm()
        };
        let (e6, e9) = (err(1e-6), err(1e-9));
        assert!(e9 < e6 / 50.0, "{e6} {e9}");
    }

    struct Stopper;

    impl OdeSystem for Stopper {
        fn rhs(&self, _t: f64, y: &[Complex64], dy: &mut [Complex64]) -> Result<()> {
            dy[0] = y[0];
            Ok(())
        }
        fn check(&self, t: f64, y: &[Complex64]) -> Result<()> {
            if y[0].norm() > 10.0 {
                return Err(Error::BlowUp {
                    t,
                    reason: "grew".into(),
                });
            }
            Ok(())
        }
    }

    #[test]
    fn check_hook_truncates() {
        let grid: Vec<f64> = (0..=10).map(|i| i as f64).collect();
        let traj = integrate(
            &Stopper,
            &grid,
            vec![Complex64::new(1.0, 0.0)],
            &IntegratorOptions::with_tol(1e-10),
        )
        .unwrap();
        let (t_stop, err) = traj.stopped.clone().unwrap();
        assert!(matches!(err, Error::BlowUp { .. }));
        assert!(t_stop > 10f64.ln() - 1e-9 && t_stop < 3.5);
        assert_eq!(*traj.times.last().unwrap(), t_stop);
    }
}
