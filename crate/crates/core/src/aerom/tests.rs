use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::euler1d::{build_initial_condition, Grid, SolverConfig};
use crate::nn::{finite_difference_check, gradcheck, GradcheckOptions, ParameterSet, Tape, Tensor};
use crate::sampling::{fit_normalization, generate_dataset, lhs_sample, split_dataset, Dataset, ParameterRanges, ParameterVector};

fn tiny_dataset(n: usize, nx: usize) -> Dataset {
    let thetas = lhs_sample(n, &ParameterRanges::shock_tube(), 11);
    generate_dataset(&thetas, &Grid::unit(nx).unwrap(), &SolverConfig::default(), 11).unwrap()
}

fn small_config() -> TrainingConfig {
    TrainingConfig { epochs: 15, batch_size: 8, latent_dim: 8, forward_epochs: 40, seed: 5, ..Default::default() }
}

/// Bundle with random (nonzero) forward-operator weights so every stage of
/// the prediction chain is exercised.
fn random_bundle(nx: usize, seed: u64) -> AeRomBundle {
    let data = tiny_dataset(6, nx);
    let stats = fit_normalization(&data, &[0, 1, 2, 3, 4, 5]).unwrap();
    let mut b = AeRomBundle::init(Architecture::new(nx, 8), data.grid.clone(), stats, seed).unwrap();
    let mut fwd = b.arch.init_forward(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let flat: Vec<f64> = fwd.flatten().iter().map(|v| v + rng.random_range(-0.1..0.1)).collect();
    fwd.assign_flat(&flat).unwrap();
    b.forward = Some(fwd);
    b
}

#[test]
fn decode_shape_and_encode_length() {
    let b = random_bundle(64, 1);
    let x0 = build_initial_condition(&ParameterVector::sod(), &b.grid).unwrap();
    let z = b.encode(&x0).unwrap();
    assert_eq!(z.len(), 8);
    assert_eq!(z, b.encode(&x0).unwrap());
    let x = b.decode(&z).unwrap();
    assert_eq!((x.rho.len(), x.u.len(), x.p.len()), (64, 64, 64));
    assert!(b.decode(&z[..7]).is_err());
    assert!(b.encode(&build_initial_condition(&ParameterVector::sod(), &Grid::unit(32).unwrap()).unwrap()).is_err());
    let big = AeRomBundle::init(Architecture::new(1000, 32), Grid::unit(1000).unwrap(), b.stats, 0).unwrap();
    let f = big.decode(&[0.1; 32]).unwrap();
    assert_eq!(f.len(), 1000);
}

#[test]
fn encode_is_continuous() {
    let b = random_bundle(64, 2);
    let x0 = build_initial_condition(&ParameterVector::sod(), &b.grid).unwrap();
    let mut x1 = x0.clone();
    x1.rho[10] += 1e-8;
    let (z0, z1) = (b.encode(&x0).unwrap(), b.encode(&x1).unwrap());
    let d = z0.iter().zip(&z1).map(|(a, c)| (a - c).abs()).fold(0.0, f64::max);
    assert!(d > 0.0 && d < 1e-6, "{d}");
}

#[test]
fn full_autoencoder_gradcheck() {
    let a = Architecture::new(32, 4);
    let mut params = a.init_encoder(3);
    for (n, t) in a.init_decoder(4).names().iter().zip(a.init_decoder(4).tensors()) {
        params.insert(n.clone(), t.clone()).unwrap();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x = Tensor::new(vec![2, 3, 32], (0..192).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    let n_enc = a.init_encoder(0).len();
    let loss = |t: &mut Tape, v: &[crate::nn::Var]| {
        let xv = t.constant(x.clone());
        let z = a.encoder(t, &v[..n_enc], xv)?;
        let y = a.decoder(t, &v[n_enc..], z)?;
        t.mse(y, xv)
    };
    let report = gradcheck(&params, loss, GradcheckOptions { probes_per_tensor: 6, ..Default::default() }).unwrap();
    assert!(report.passed, "{report:?}");
}

#[test]
fn decode_gradcheck_in_latent() {
    let b = random_bundle(32, 4);
    let z0 = vec![0.3, -0.2, 0.5, 0.1, -0.7, 0.0, 0.2, 0.4];
    let weights: Vec<f64> = (0..96).map(|i| ((i * 7) % 11) as f64 / 11.0 - 0.5).collect();
    let f = |z: &[f64]| -> f64 {
        let x = b.decode(z).unwrap().to_flat();
        x.iter().zip(&weights).map(|(a, w)| a * w).sum()
    };
    let mut t = Tape::new();
    let dv = b.decoder.register(&mut t, false);
    let zv = t.leaf(Tensor::new(vec![1, 8], z0.clone()).unwrap(), true);
    let y = b.arch.decoder(&mut t, &dv, zv).unwrap();
    let y = t.channel_affine(y, &b.stats.std, &b.stats.mean).unwrap();
    let g = t.backward_with_seed(y, Tensor::new(vec![1, 3, 32], weights.clone()).unwrap()).unwrap();
    let grad = g.get(zv).into_data();
    let err = finite_difference_check(&z0, &grad, &(0..8).collect::<Vec<_>>(), 1e-5, 1e-8, f);
    assert!(err <= 1e-5, "{err}");
}

#[test]
fn theta_gradient_matches_finite_differences() {
    let b = random_bundle(64, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..10 {
        let th = [rng.random_range(0.3..1.7), rng.random_range(0.3..1.7), rng.random_range(0.03..0.17), rng.random_range(0.03..0.17)];
        let cell = rng.random_range(0..3 * 64);
        let f = |v: &[f64]| b.predict_final(&ParameterVector::from_array([v[0], v[1], v[2], v[3]])).unwrap().to_flat()[cell];
        let mut t = Tape::new();
        let (tv, y) = b.record_prediction(&mut t, &ParameterVector::from_array(th)).unwrap();
        let mut seed = Tensor::zeros(&[1, 3, 64]);
        seed.data_mut()[cell] = 1.0;
        let grad = t.backward_with_seed(y, seed).unwrap().get(tv).into_data();
        let scale = grad.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
        // untrained weights give O(1e-6) sensitivities, so h = 1e-4 keeps roundoff below truncation
        let err = finite_difference_check(&th, &grad, &[0, 1, 2, 3], 1e-4, 1e-3 * scale + 1e-14, f);
        assert!(err <= 1e-4, "cell {cell}: {err}");
    }
}

#[test]
fn predict_final_requires_forward_operator() {
    let mut b = random_bundle(32, 7);
    let p = b.predict_final(&ParameterVector::sod()).unwrap();
    assert_eq!(p, b.predict_final(&ParameterVector::sod()).unwrap());
    assert!(p.to_flat().iter().all(|v| v.is_finite()));
    b.forward = None;
    assert!(matches!(b.predict_final(&ParameterVector::sod()), Err(AeromError::Untrained)));
}

#[test]
fn checkpoint_roundtrip_is_exact() {
    let b = random_bundle(32, 8);
    let bytes = b.to_bytes().unwrap();
    let back = AeRomBundle::from_bytes(&bytes).unwrap();
    assert_eq!(back, b);
    assert_eq!(back.to_bytes().unwrap(), bytes);
    let mut bad = bytes.clone();
    bad.truncate(bytes.len() - 8);
    assert!(AeRomBundle::from_bytes(&bad).is_err());
}

#[test]
fn autoencoder_training_reduces_loss_and_is_deterministic() {
    let data = tiny_dataset(20, 64);
    let (train, val) = split_dataset(20, 0.8, 1).unwrap();
    let cfg = small_config();
    let b1 = train_autoencoder(&data, &train, &val, &cfg).unwrap();
    let h = &b1.metadata.ae_history;
    assert_eq!(h.len(), cfg.epochs);
    assert!(h.train.iter().chain(&h.val).all(|v| v.is_finite()));
    assert!(h.train.last().unwrap() < &h.train[0]);
    let b2 = train_autoencoder(&data, &train, &val, &cfg).unwrap();
    assert_eq!(b1, b2);
    assert_eq!(h.to_csv().lines().count(), cfg.epochs + 1);
    let err = evaluate_autoencoder(&b1, &data, &val).unwrap();
    assert!((err.total - h.val.last().unwrap()).abs() < 1e-12);
}

#[test]
fn forward_operator_freezes_encoder_and_learns() {
    let data = tiny_dataset(20, 64);
    let (train, val) = split_dataset(20, 0.8, 1).unwrap();
    // full-batch steps: the 16-pair toy problem is too small for mini-batch noise to average out
    let cfg = TrainingConfig { forward_epochs: 200, batch_size: 16, ..small_config() };
    let mut b = train_autoencoder(&data, &train, &val, &cfg).unwrap();
    let before: Vec<u64> = b.encoder.flatten().iter().map(|v| v.to_bits()).collect();
    let h = train_forward_operator(&mut b, &data, &train, &val, &cfg).unwrap();
    let after: Vec<u64> = b.encoder.flatten().iter().map(|v| v.to_bits()).collect();
    assert_eq!(before, after);
    assert_eq!(h.len(), 200);
    let windows: Vec<f64> = h.train.chunks(20).map(|w| w.iter().sum::<f64>() / 20.0).collect();
    assert!(windows.windows(2).all(|w| w[1] < w[0]), "{windows:?}");
    assert!(b.predict_final(&ParameterVector::sod()).is_ok());
}

#[test]
fn forward_operator_identity_target() {
    let data = tiny_dataset(10, 64);
    let (train, val) = split_dataset(10, 0.8, 1).unwrap();
    let cfg = TrainingConfig { epochs: 3, ..small_config() };
    let mut b = train_autoencoder(&data, &train, &val, &cfg).unwrap();
    let mut same = data.clone();
    for p in &mut same.pairs {
        p.xf = p.x0.clone();
    }
    let h = train_forward_operator(&mut b, &same, &train, &val, &cfg).unwrap();
    assert!(*h.train.last().unwrap() < 1e-6);
}

#[test]
fn decoded_auxiliary_loss_runs() {
    let data = tiny_dataset(10, 64);
    let (train, val) = split_dataset(10, 0.8, 1).unwrap();
    let cfg = TrainingConfig { epochs: 2, forward_epochs: 3, decoded_loss_weight: 0.5, ..small_config() };
    let mut b = train_autoencoder(&data, &train, &val, &cfg).unwrap();
    let h = train_forward_operator(&mut b, &data, &train, &val, &cfg).unwrap();
    assert!(h.train.iter().all(|v| v.is_finite() && *v > 0.0));
}

#[test]
fn non_finite_loss_aborts() {
    let data = tiny_dataset(10, 64);
    let (train, val) = split_dataset(10, 0.8, 1).unwrap();
    let cfg = TrainingConfig { learning_rate: 1e300, epochs: 5, ..small_config() };
    match train_autoencoder(&data, &train, &val, &cfg) {
        Err(AeromError::NonFiniteLoss { epoch, batch, .. }) => assert!(epoch >= 1 && batch >= 1),
        other => panic!("expected non-finite loss, got {other:?}"),
    }
}

#[test]
fn config_validation() {
    let data = tiny_dataset(10, 64);
    let (train, val) = split_dataset(10, 0.8, 1).unwrap();
    let too_big = TrainingConfig { batch_size: 17, ..small_config() };
    assert!(matches!(train_autoencoder(&data, &train, &val, &too_big), Err(AeromError::Config(_))));
    assert!(TrainingConfig { epochs: 0, ..small_config() }.validate().is_err());
    assert!(train_autoencoder(&data, &[], &val, &small_config()).is_err());
}

#[test]
fn pod_with_full_rank_reproduces_training_snapshots() {
    let data = tiny_dataset(8, 32);
    let idx: Vec<usize> = (0..8).collect();
    let stats = fit_normalization(&data, &idx).unwrap();
    let exact = pod_baseline(&data, &idx, &idx, &stats, 16).unwrap();
    assert!(exact.total < 1e-20, "{exact:?}");
    let one = pod_baseline(&data, &idx, &idx, &stats, 1).unwrap();
    let four = pod_baseline(&data, &idx, &idx, &stats, 4).unwrap();
    assert!(four.total < one.total);
}

#[test]
fn sweeps_have_one_row_per_value() {
    let data = tiny_dataset(12, 32);
    let cfg = TrainingConfig { epochs: 2, batch_size: 4, ..small_config() };
    let s = latent_sweep(&data, &[2, 4], &cfg).unwrap();
    assert_eq!(s.rows.iter().map(|r| r.value).collect::<Vec<_>>(), vec![2, 4]);
    assert!(s.rows.iter().all(|r| r.val_mse >= 0.0 && r.val_mse_u >= 0.0));
    assert_eq!(s.to_csv().lines().next().unwrap(), "latent_dim,val_mse,val_mse_rho,val_mse_u,val_mse_p,train_seconds");
    let d = data_scaling_study(&data, &[5, 12], &cfg).unwrap();
    assert_eq!(d.rows.len(), 2);
    assert!(data_scaling_study(&data, &[13], &cfg).is_err());
    let _unused: ParameterSet = ParameterSet::new();
}


#[test]
fn cosine_schedule_endpoints_and_midpoint() {
    let c = TrainingConfig { learning_rate: 1e-3, final_learning_rate: Some(1e-5), ..Default::default() };
    assert_eq!(c.learning_rate_at(0, 11), 1e-3);
    assert!((c.learning_rate_at(10, 11) - 1e-5).abs() < 1e-18);
    assert!((c.learning_rate_at(5, 11) - 0.5 * (1e-3 + 1e-5)).abs() < 1e-18);
    let lrs: Vec<f64> = (0..11).map(|e| c.learning_rate_at(e, 11)).collect();
    assert!(lrs.windows(2).all(|w| w[1] < w[0]));
    let flat = TrainingConfig { final_learning_rate: None, ..c };
    assert_eq!(flat.learning_rate_at(7, 11), 1e-3);
}
