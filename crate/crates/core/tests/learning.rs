mod common;

use common::periodic_panel;
use countcast_core::lstm::{forecast_from_counts, forecast_horizon, predict_onestep_all, train, TrainConfig};
use ndarray::{concatenate, Axis};

fn noiseless_config() -> TrainConfig {
    TrainConfig {
        dropout: 0.0,
        recurrent_dropout: 0.0,
        seed: 11,
        ..TrainConfig::default()
    }
}

#[test]
fn training_halves_error_and_beats_persistence() {
    let panel = periodic_panel(120);
    let (model, history) = train(&panel, &noiseless_config()).unwrap();
    let first = history.train_mae[0];
    let last = *history.train_mae.last().unwrap();
    assert!(last < 0.5 * first, "train MAE {first} -> {last}");

    let point = predict_onestep_all(&model, &panel).unwrap();
    let counts = panel.as_f64();
    let mut model_err = 0.0;
    let mut persistence_err = 0.0;
    for (row, &day) in point.days.iter().enumerate() {
        for d in 0..panel.n_series() {
            model_err += (point.values[[row, d]] - counts[[day, d]]).abs();
            persistence_err += (counts[[day - 1, d]] - counts[[day, d]]).abs();
        }
    }
    assert!(model_err < persistence_err, "model {model_err} vs persistence {persistence_err}");
}

#[test]
fn rollout_equals_one_step_on_extended_history() {
    let panel = periodic_panel(40);
    let cfg = TrainConfig {
        steps: 20,
        k: 7,
        hidden: 4,
        ..noiseless_config()
    };
    let (model, _) = train(&panel, &cfg).unwrap();
    let horizon = 30;
    let rolled = forecast_horizon(&model, &panel, horizon).unwrap();
    assert_eq!(rolled.days, (40..70).collect::<Vec<_>>());
    assert!(rolled.observed.iter().all(|o| !o));
    assert!(rolled.values.iter().all(|v| *v >= 0.0 && v.is_finite()));

    // Day T+j predicted from the history extended by the first j predictions.
    let counts = panel.as_f64();
    for j in 0..horizon {
        let extended = concatenate(Axis(0), &[counts.view(), rolled.values.slice(ndarray::s![..j, ..])]).unwrap();
        let next = forecast_from_counts(&model, &extended, 1).unwrap();
        for d in 0..panel.n_series() {
            let a = next.values[[0, d]];
            let b = rolled.values[[j, d]];
            assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()), "day {j} series {d}: {a} vs {b}");
        }
    }

    let empty = forecast_horizon(&model, &panel, 0).unwrap();
    assert_eq!(empty.len(), 0);
}
