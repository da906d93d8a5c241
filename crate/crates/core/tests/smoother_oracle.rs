use gpett_core::gp_model::{BasisProjector, GpHyperParams, InputGrid};
use gpett_core::tracker::{
    ekf_update_scan_with, initialize_from_scan, make_process_model, predict_with_model,
    smoother_push, InitConfig, LagWindow, PointLinearization, PointMeasurementModel,
    ProcessNoiseConfig, Scan, TrackState, Tracker, TrackerConfig, IDX_X, IDX_Y,
};
use gpett_core::Point;
use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Observes the tracked position directly.
struct PositionOnly {
    noise_var: f64,
}

impl PointMeasurementModel for PositionOnly {
    fn linearize(&self, state: &TrackState, _z: &Point) -> gpett_core::Result<PointLinearization> {
        let mut jacobian = DMatrix::zeros(2, state.dim());
        jacobian[(0, IDX_X)] = 1.0;
        jacobian[(1, IDX_Y)] = 1.0;
        Ok(PointLinearization {
            predicted: Vector2::new(state.mean[IDX_X], state.mean[IDX_Y]),
            jacobian,
            noise: Matrix2::identity() * self.noise_var,
        })
    }
}

fn setup() -> (InputGrid, GpHyperParams, ProcessNoiseConfig) {
    let hp = GpHyperParams::new(2.0, std::f64::consts::PI / 10.0, 0.8, 0.05, 1.0).unwrap();
    let basis = InputGrid::uniform_angles(8).unwrap();
    let pn = ProcessNoiseConfig {
        sigma_q: 1.0,
        sigma_q_psi: 1e-2,
    };
    (basis, hp, pn)
}

fn random_scans(rng: &mut ChaCha8Rng, count: usize, dt: f64) -> Vec<Scan> {
    (0..count)
        .map(|k| {
            let t = k as f64 * dt;
            let m = rng.random_range(1..5);
            let pts = (0..m)
                .map(|_| {
                    [
                        2.0 * t + rng.random_range(-1.0..1.0),
                        -t + rng.random_range(-1.0..1.0),
                    ]
                })
                .collect();
            Scan::new(t, pts).unwrap()
        })
        .collect()
}

/// Plain-matrix forward Kalman filter and full RTS pass over every scan.
struct BatchRts {
    filtered: Vec<(DVector<f64>, DMatrix<f64>)>,
    smoothed: Vec<(DVector<f64>, DMatrix<f64>)>,
}

fn batch_rts(
    prior: (DVector<f64>, DMatrix<f64>),
    scans: &[Scan],
    models: &[(DMatrix<f64>, DMatrix<f64>, DVector<f64>)],
    noise_var: f64,
) -> BatchRts {
    let dim = prior.0.len();
    let mut filtered = Vec::new();
    let mut predicted = Vec::new();
    let (mut m, mut p) = prior;
    for (k, scan) in scans.iter().enumerate() {
        if k > 0 {
            let (f, q, b) = &models[k];
            m = f * &m + b;
            p = f * &p * f.transpose() + q;
        }
        predicted.push((m.clone(), p.clone()));
        let rows = 2 * scan.points.len();
        let mut h = DMatrix::zeros(rows, dim);
        let mut z = DVector::zeros(rows);
        for (i, pt) in scan.points.iter().enumerate() {
            h[(2 * i, 0)] = 1.0;
            h[(2 * i + 1, 1)] = 1.0;
            z[2 * i] = pt[0];
            z[2 * i + 1] = pt[1];
        }
        let r = DMatrix::identity(rows, rows) * noise_var;
        let s = &h * &p * h.transpose() + r;
        let gain = &p * h.transpose() * s.try_inverse().unwrap();
        m = &m + &gain * (z - &h * &m);
        p = (DMatrix::identity(dim, dim) - &gain * &h) * &p;
        filtered.push((m.clone(), p.clone()));
    }
    let n = scans.len();
    let mut smoothed = vec![filtered[n - 1].clone(); n];
    for k in (0..n - 1).rev() {
        let (mf, pf) = &filtered[k];
        let (mp, pp) = &predicted[k + 1];
        let f = &models[k + 1].0;
        let g = pf * f.transpose() * pp.clone().try_inverse().unwrap();
        let (ms, ps) = &smoothed[k + 1];
        smoothed[k] = (
            mf + &g * (ms - mp),
            pf + &g * (ps - pp) * g.transpose(),
        );
    }
    BatchRts { filtered, smoothed }
}

#[test]
fn fixed_lag_matches_batch_rts_on_linear_surrogate() {
    let (basis, hp, pn) = setup();
    let noise_var = 0.3;
    let model = PositionOnly { noise_var };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let dt = 0.1;
    let scans = random_scans(&mut rng, 25, dt);
    let lag = 4;

    let mut models = vec![(DMatrix::zeros(0, 0), DMatrix::zeros(0, 0), DVector::zeros(0))];
    let prior = initialize_from_scan(&scans[0], &basis, &hp, &InitConfig::default()).unwrap();
    let dim = prior.dim();
    let mut state = prior.clone();
    let mut window = LagWindow::new(lag);
    let mut emitted = Vec::new();
    for (k, scan) in scans.iter().enumerate() {
        let (predicted, f) = if k == 0 {
            (state.clone(), DMatrix::identity(dim, dim))
        } else {
            let dt = scan.time - state.time;
            let (f, q) = make_process_model(dt, &pn, &hp, &basis).unwrap();
            let offset = DVector::from_fn(dim, |i, _| {
                if i >= 5 {
                    (1.0 - f[(i, i)]) * hp.prior_mean
                } else {
                    0.0
                }
            });
            models.push((f.clone(), q.clone(), offset));
            (predict_with_model(&state, dt, &f, &q), f)
        };
        state = ekf_update_scan_with(&predicted, scan, &model).unwrap();
        let (w, out) = smoother_push(window, state.clone(), predicted, f).unwrap();
        window = w;
        emitted.extend(out);
    }
    let tail = window.flush().unwrap();
    assert_eq!(emitted.len() + tail.len(), scans.len());

    let prior_pair = (prior.mean.clone(), prior.cov.clone());
    for (k, est) in emitted.iter().enumerate() {
        // fixed-lag estimate at k uses data up to k + lag
        let oracle = batch_rts(prior_pair.clone(), &scans[..=k + lag], &models, noise_var);
        let (m, p) = &oracle.smoothed[k];
        assert!((&est.mean - m).amax() < 1e-8, "mean at {k}");
        assert!((&est.cov - p).amax() < 1e-8, "cov at {k}");
    }
    let full = batch_rts(prior_pair, &scans, &models, noise_var);
    let first_tail = scans.len() - tail.len();
    for (i, est) in tail.iter().enumerate() {
        let (m, p) = &full.smoothed[first_tail + i];
        assert!((&est.mean - m).amax() < 1e-8);
        assert!((&est.cov - p).amax() < 1e-8);
    }
    let (m, _) = &full.filtered[scans.len() - 1];
    assert!((&state.mean - m).amax() < 1e-8);
}

#[test]
fn tracker_window_matches_rts_recomputed_from_its_records() {
    let mut cfg = TrackerConfig::simulation_defaults();
    cfg.use_smoother = true;
    cfg.lag = 6;
    let mut tracker = Tracker::new(cfg.clone()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for k in 0..15 {
        let t = 0.1 * k as f64;
        let c = [1.5 * t, 0.5 * t];
        let pts = (0..12)
            .map(|_| {
                let a: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                let r = 2.0 + 0.3 * (3.0 * a).cos();
                [c[0] + r * a.cos(), c[1] + r * a.sin()]
            })
            .collect();
        tracker.process_scan(&Scan::new(t, pts).unwrap()).unwrap();
    }
    let window = tracker.window().unwrap();
    let entries: Vec<_> = window.entries().cloned().collect();
    let smoothed = window.smoothed().unwrap();
    assert_eq!(smoothed.len(), entries.len());

    let n = entries.len();
    let mut ms = entries[n - 1].filtered.mean.clone();
    let mut ps = entries[n - 1].filtered.cov.clone();
    for k in (0..n - 1).rev() {
        let cur = &entries[k].filtered;
        let next = &entries[k + 1];
        let g = &cur.cov
            * next.transition.transpose()
            * next.predicted.cov.clone().try_inverse().unwrap();
        let mut diff = &ms - &next.predicted.mean;
        diff[4] = (diff[4] + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU)
            - std::f64::consts::PI;
        ms = &cur.mean + &g * diff;
        ps = &cur.cov + &g * (&ps - &next.predicted.cov) * g.transpose();
        assert!((&smoothed[k].mean - &ms).amax() < 1e-8, "mean at {k}");
        assert!((&smoothed[k].cov - &ps).amax() < 1e-6 * ps.amax(), "cov at {k}");
    }

    // smoothed covariance never exceeds the filtered one
    let projector = BasisProjector::new(&cfg.basis().unwrap(), &cfg.hp).unwrap();
    assert_eq!(projector.basis().len(), cfg.basis_size);
    for (s, e) in smoothed.iter().zip(&entries) {
        let gap = &e.filtered.cov - &s.cov;
        let min_eig = gap.symmetric_eigenvalues().min();
        assert!(min_eig > -1e-8, "{min_eig}");
    }
}
