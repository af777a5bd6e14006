//! Hand-computed examples for the scoring losses, encoder losses, gradient
//! penalty, contamination counts, and ROC areas.

use encgan::data::{anomaly_count, map_u8, Label};
use encgan::evaluation::auc;
use encgan::scoring::{minmax_normalize, origin_distance, residual_normalized, residual_raw, ScoreConfig};
use encgan::tensor::Tensor;
use encgan::training::losses::{critic_objective, image_reconstruction_loss, latent_reconstruction_loss, Critic};

const EXACT: f64 = 1e-9;
const NUMERIC: f64 = 1e-6;

fn close(got: f64, want: f64, tol: f64) {
    assert!((got - want).abs() <= tol, "got {got}, want {want} (tol {tol:e})");
}

#[test]
fn minmax_examples() {
    let w = minmax_normalize(&[0.0f64, 2.0, 4.0]);
    for (g, e) in w.iter().zip([0.0, 0.5, 1.0]) {
        close(*g, e, EXACT);
    }
    assert_eq!(minmax_normalize(&[-1.0f64, 1.0]), vec![0.0, 1.0]);
    assert_eq!(minmax_normalize(&[0.7f64; 5]), vec![0.0; 5]);
}

#[test]
fn normalized_residual_examples() {
    let q = [0.0f64, 1.0, 0.0, 1.0];
    close(residual_normalized(&q, &q).unwrap(), 0.0, EXACT);
    let half: Vec<f64> = q.iter().map(|v| 0.5 * v).collect();
    close(residual_normalized(&q, &half).unwrap(), 0.0, EXACT);
    // |±1| in four cells: ‖·‖₂ = 2, divided by N_X = 4
    let checker = [0.0f64, 1.0, 1.0, 0.0];
    let flipped = [1.0f64, 0.0, 0.0, 1.0];
    close(residual_normalized(&checker, &flipped).unwrap(), 0.5, EXACT);
}

#[test]
fn raw_residual_examples() {
    let q = [0.0f64, 1.0, 0.0, 1.0];
    close(residual_raw(&q, &q).unwrap(), 0.0, EXACT);
    close(residual_raw(&[0.0f64, 0.0], &[1.0, 0.0]).unwrap(), 1.0, EXACT);
    // contrast change: raw residual sees ‖0.5·Q‖₂ = √0.5, normalized sees nothing
    let half: Vec<f64> = q.iter().map(|v| 0.5 * v).collect();
    close(residual_raw(&q, &half).unwrap(), 0.5f64.sqrt(), EXACT);
    assert_eq!(residual_normalized(&q, &half).unwrap(), 0.0);
}

#[test]
fn origin_distance_examples() {
    close(origin_distance(&[0.0f64; 7]), 0.0, EXACT);
    close(origin_distance(&[1.0f64; 4]), -1.0, EXACT);
    let mut unit = vec![0.0f64; 512];
    unit[17] = 1.0;
    close(origin_distance(&unit), -0.044194173824159216, EXACT);
}

#[test]
fn combined_score_examples() {
    let (ln, lo) = (0.02f64, -0.5f64);
    close(ScoreConfig::new(1.0, 0.0).unwrap().combine(ln, lo), ln, EXACT);
    close(ScoreConfig::new(0.0, 0.0).unwrap().combine(ln, lo), lo, EXACT);
    close(ScoreConfig::new(0.05, 0.0).unwrap().combine(ln, lo), -0.474, EXACT);
}

fn column(v: &[f64]) -> Tensor<f64> {
    Tensor::from_vec(&[1, v.len()], v.to_vec()).unwrap()
}

#[test]
fn encoder_loss_examples() {
    let id = |t: &Tensor<f64>| t.clone();
    let double = |t: &Tensor<f64>| t.map(|v| 2.0 * v);
    let z = column(&[0.6, -0.8, 0.0]);
    close(image_reconstruction_loss(id, id, &z), 0.0, EXACT);
    close(latent_reconstruction_loss(id, id, &z), 0.0, EXACT);
    for n in [1usize, 4, 512] {
        let mut e1 = vec![0.0; n];
        e1[0] = 1.0;
        let z = column(&e1);
        close(latent_reconstruction_loss(id, double, &z), 1.0 / n as f64, EXACT);
        close(image_reconstruction_loss(id, double, &z), 1.0 / n as f64, EXACT);
    }
}

struct Constant(f64);

impl Critic<f64> for Constant {
    fn scores(&self, x: &Tensor<f64>) -> Vec<f64> {
        vec![self.0; x.batch()]
    }
    fn input_gradients(&self, x: &Tensor<f64>) -> Tensor<f64> {
        Tensor::zeros(x.shape())
    }
}

struct Linear(Vec<f64>);

impl Critic<f64> for Linear {
    fn scores(&self, x: &Tensor<f64>) -> Vec<f64> {
        (0..x.batch()).map(|b| x.item(b).iter().zip(&self.0).map(|(a, u)| a * u).sum()).collect()
    }
    fn input_gradients(&self, x: &Tensor<f64>) -> Tensor<f64> {
        let rows: Vec<Vec<f64>> = (0..x.batch()).map(|_| self.0.clone()).collect();
        Tensor::stack(&rows, &x.shape()[1..]).unwrap()
    }
}

fn images(values: &[f64]) -> Tensor<f64> {
    Tensor::from_vec(&[values.len() / 4, 1, 2, 2], values.to_vec()).unwrap()
}

#[test]
fn gradient_penalty_examples() {
    let real = images(&[0.3, -0.1, 0.9, 0.2, -0.4, 0.5, 0.0, 0.8]);
    let fake = images(&[0.1, 0.1, -0.7, 0.6, 0.2, -0.3, 0.4, 0.0]);
    let eps = [0.25, 0.8];

    let flat = critic_objective(&Constant(-2.0), &real, &fake, &eps, 10.0);
    close(flat.wasserstein, 0.0, EXACT);
    close(flat.gradient_penalty, 1.0, EXACT);

    let u = vec![0.5, 0.5, -0.5, 0.5];
    let lin = critic_objective(&Linear(u), &real, &fake, &eps, 10.0);
    assert_eq!(lin.gradient_penalty, 0.0);
    // ⟨u,real⟩ = (−0.25, 0.45), ⟨u,fake⟩ = (0.75, −0.25): 0.1 − 0.25
    close(lin.wasserstein, -0.15, NUMERIC);
    close(lin.loss, 0.15, NUMERIC);

    // ‖∇‖ = 3 everywhere: (3 − 1)² = 4
    let steep = critic_objective(&Linear(vec![1.5; 4]), &real, &fake, &eps, 10.0);
    close(steep.gradient_penalty, 4.0, EXACT);
}

#[test]
fn contamination_counts() {
    assert_eq!(anomaly_count(0.0, 1000).unwrap(), 0);
    assert_eq!(anomaly_count(0.02, 1000).unwrap(), 20);
    assert_eq!(anomaly_count(0.02, 525_657).unwrap(), 10_728);
    // 0.5·3/0.5 = 3 exactly; 0.2·2/0.8 = 0.5 rounds away from zero
    assert_eq!(anomaly_count(0.5, 3).unwrap(), 3);
    assert_eq!(anomaly_count(0.2, 2).unwrap(), 1);
    assert!(anomaly_count(1.0, 10).is_err());
}

#[test]
fn eight_bit_map() {
    close(map_u8(0.0) as f64, -1.0, EXACT);
    close(map_u8(255.0) as f64, 1.0, EXACT);
    close(map_u8(128.0) as f64, 2.0 * 128.0 / 255.0 - 1.0, NUMERIC);
}

fn labeled(normals: &[f64], anomalies: &[f64]) -> Vec<(f64, Label)> {
    let mut out: Vec<_> = normals.iter().map(|&s| (s, Label::Normal)).collect();
    out.extend(anomalies.iter().map(|&s| (s, Label::Anomaly)));
    out
}

#[test]
fn roc_examples() {
    close(auc(&labeled(&[0.1, 0.2], &[0.3, 0.4])).unwrap(), 1.0, EXACT);
    close(auc(&labeled(&[0.1, 0.3], &[0.2, 0.4])).unwrap(), 0.75, EXACT);
    close(auc(&labeled(&[0.5, 0.5], &[0.5, 0.5])).unwrap(), 0.5, EXACT);
}
