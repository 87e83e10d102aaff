use serde::{Deserialize, Serialize};

use super::network::{Network, Prediction};
use super::train::{image_to_input, resize_for_input};
use super::NnError;
use crate::dataset::SequenceRecord;
use crate::imaging::Image;
use crate::pose::{attitude_error, dcm_to_quat, position_error, range_normalized_error, rot6d_to_dcm, Pose, Rot6D, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Range-normalised position error bound (fraction).
    pub position_frac: f64,
    pub attitude_deg: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { position_frac: 0.05, attitude_deg: 5.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameMetrics {
    pub t: f64,
    pub dt_m: f64,
    pub dq_deg: f64,
    pub dtr_frac: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub frames: usize,
    pub mean_dt_m: f64,
    pub median_dt_m: f64,
    pub mean_dq_deg: f64,
    pub median_dq_deg: f64,
    pub mean_dtr_frac: f64,
    pub median_dtr_frac: f64,
    /// Percentages in `[0, 100]`.
    pub position_compliance: f64,
    pub attitude_compliance: f64,
}

/// Median with the average-of-middle-two convention; NaN when empty.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

pub fn summarize(frames: &[FrameMetrics], thresholds: &Thresholds) -> Summary {
    let pick = |f: fn(&FrameMetrics) -> f64| frames.iter().map(f).collect::<Vec<_>>();
    let (dt, dq, dtr) = (pick(|m| m.dt_m), pick(|m| m.dq_deg), pick(|m| m.dtr_frac));
    let pct = |ok: usize| if frames.is_empty() { f64::NAN } else { 100.0 * ok as f64 / frames.len() as f64 };
    Summary {
        frames: frames.len(),
        mean_dt_m: mean(dt.iter().copied()),
        median_dt_m: median(&dt),
        mean_dq_deg: mean(dq.iter().copied()),
        median_dq_deg: median(&dq),
        mean_dtr_frac: mean(dtr.iter().copied()),
        median_dtr_frac: median(&dtr),
        position_compliance: pct(dtr.iter().filter(|&&v| v <= thresholds.position_frac).count()),
        attitude_compliance: pct(dq.iter().filter(|&&v| v <= thresholds.attitude_deg).count()),
    }
}

/// Maps the heads back to a pose through the 6D attitude representation.
pub fn prediction_to_pose(pred: &Prediction<f32>) -> Result<Pose, NnError> {
    let r = Rot6D(pred.r.map(f64::from));
    let q = dcm_to_quat(&rot6d_to_dcm(&r)?);
    Ok(Pose::new(q, Vec3::new(pred.t[0] as f64, pred.t[1] as f64, pred.t[2] as f64)))
}

pub fn frame_metrics(t: f64, predicted: &Pose, truth: &Pose) -> Result<FrameMetrics, NnError> {
    Ok(FrameMetrics {
        t,
        dt_m: position_error(&predicted.translation, &truth.translation),
        dq_deg: attitude_error(&predicted.rotation, &truth.rotation),
        dtr_frac: range_normalized_error(&predicted.translation, &truth.translation)?,
    })
}

/// Scores externally produced poses against a sequence's labels.
pub fn evaluate_poses(predictions: &[Pose], sequence: &SequenceRecord, thresholds: &Thresholds) -> Result<(Vec<FrameMetrics>, Summary), NnError> {
    if predictions.len() != sequence.frames.len() {
        return Err(NnError::ShapeMismatch(format!("{} predictions for {} frames", predictions.len(), sequence.frames.len())));
    }
    let frames = predictions.iter().zip(&sequence.frames).map(|(p, f)| frame_metrics(f.t, p, &f.pose)).collect::<Result<Vec<_>, _>>()?;
    let summary = summarize(&frames, thresholds);
    Ok((frames, summary))
}

/// Runs the network over every frame at the checkpoint's input size.
pub fn predict_sequence(network: &Network<f32>, sequence: &SequenceRecord, input: (usize, usize)) -> Result<Vec<Pose>, NnError> {
    (0..sequence.frames.len())
        .map(|i| {
            let img = Image::load(&sequence.image_path(i))?;
            let img = resize_for_input(&img, input)?;
            let pred = network.forward(&image_to_input(&img), input.1, input.0)?;
            prediction_to_pose(&pred)
        })
        .collect()
}

pub fn evaluate(network: &Network<f32>, sequence: &SequenceRecord, input: (usize, usize), thresholds: &Thresholds) -> Result<(Vec<FrameMetrics>, Summary), NnError> {
    let poses = predict_sequence(network, sequence, input)?;
    evaluate_poses(&poses, sequence, thresholds)
}

pub fn write_frame_csv(frames: &[FrameMetrics]) -> String {
    let mut s = String::from("t,dt_m,dq_deg,dtr_frac\n");
    for f in frames {
        s.push_str(&format!("{},{},{},{}\n", f.t, f.dt_m, f.dq_deg, f.dtr_frac));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::UnitQuaternion;

    fn metrics(dtr: &[f64]) -> Vec<FrameMetrics> {
        dtr.iter().enumerate().map(|(i, &d)| FrameMetrics { t: i as f64, dt_m: d * 2.0, dq_deg: 0.0, dtr_frac: d }).collect()
    }

    #[test]
    fn median_convention() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn perfect_predictions() {
        let truth = Pose::new(UnitQuaternion::from_axis_angle(&Vec3::new(0.0, 1.0, 0.0), 0.3), Vec3::new(0.1, -0.2, 4.0));
        let f = frame_metrics(0.0, &truth, &truth).unwrap();
        let s = summarize(&[f; 5], &Thresholds::default());
        assert_eq!((s.position_compliance, s.attitude_compliance), (100.0, 100.0));
        assert_eq!((s.mean_dt_m, s.mean_dq_deg, s.mean_dtr_frac), (0.0, 0.0, 0.0));
    }

    #[test]
    fn constant_six_percent_fails_position() {
        let s = summarize(&metrics(&[0.06; 7]), &Thresholds::default());
        assert_eq!(s.position_compliance, 0.0);
        assert_eq!(s.attitude_compliance, 100.0);
    }

    #[test]
    fn half_and_half() {
        let s = summarize(&metrics(&[0.01, 0.10, 0.01, 0.10, 0.01, 0.10]), &Thresholds::default());
        assert_eq!(s.position_compliance, 50.0);
        assert!((s.median_dtr_frac - 0.055).abs() < 1e-15);
    }

    #[test]
    fn prediction_mapping_round_trips_label() {
        let q = UnitQuaternion::from_axis_angle(&Vec3::new(1.0, 2.0, -1.0).normalize(), 1.1);
        let r = crate::pose::dcm_to_rot6d(&q.to_dcm()).0.map(|v| v as f32);
        let p = prediction_to_pose(&Prediction { t: [0.5, 0.0, 3.0], r }).unwrap();
        assert!(attitude_error(&p.rotation, &q) < 1e-3);
        let zero = Prediction { t: [0.0; 3], r: [0.0; 6] };
        assert!(matches!(prediction_to_pose(&zero), Err(NnError::Pose(_))));
    }
}
