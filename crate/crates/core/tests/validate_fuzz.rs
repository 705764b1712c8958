//! `validate` must predict `execute`: a config it accepts may only fail with a
//! numerical error, and a config it rejects must fail at run time with the
//! same code.

use maxent_bayes::error::ErrorFamily;
use maxent_bayes::harness::{self, Command, ExperimentConfig};
use proptest::prelude::*;
use serde_json::{json, Value};

fn base(command: Command) -> Value {
    match command {
        Command::Bayes => json!({"posterior": [0.2, 0.3, 0.5], "loss": [[0, 1, 1], [1, 0, 1], [1, 1, 0]]}),
        Command::Tilt => json!({"q": [0.2, 0.3, 0.5], "potential": [0, 1, 2], "target": 0.8}),
        Command::Project => json!({"q": [0.2, 0.3, 0.5], "potential": [0, 1, 2], "target": 0.8, "divergence": "chi_squared"}),
        Command::Necessity => json!({"q": [0.2, 0.3, 0.5], "potential": [0, 1, 2], "target": 0.8}),
        Command::Sanov => json!({"p": [0.5, 0.5], "potential": [0, 1], "target_interval": [0.7, 1], "n_grid": [10, 20, 30]}),
        Command::Gibbs => json!({"p": [0.5, 0.5], "potential": [0, 1], "target_interval": [0.7, 0.8], "n_grid": [10, 20]}),
        Command::Rate => json!({"p": [0.3, 0.7], "potential": [0, 1], "target_interval": [0, 1], "points": 11}),
        Command::Meta => json!({"P": [0.4, 0.6], "loss_row": [0, 1], "n": 12, "Xi": [0.2, 0.6], "model_grid_step": 0.02}),
        Command::Corr => json!({"sigma_y": 1.0, "r_grid": [0, 0.2, 0.4, 0.6, 0.8], "grid": {"half_width": 8.0, "points": 401}}),
    }
}

/// Numeric fields worth perturbing, by JSON pointer.
fn targets(command: Command) -> &'static [&'static str] {
    match command {
        Command::Bayes => &["/posterior/0", "/loss/0/1"],
        Command::Tilt | Command::Project | Command::Necessity => &["/target", "/q/0", "/potential/2"],
        Command::Sanov | Command::Gibbs => &["/target_interval/0", "/p/0", "/n_grid/0"],
        Command::Rate => &["/target_interval/1", "/p/0", "/points"],
        Command::Meta => &["/Xi/0", "/Xi/1", "/n", "/model_grid_step"],
        Command::Corr => &["/sigma_y", "/r_grid/4", "/grid/points", "/grid/half_width"],
    }
}

#[derive(Debug, Clone)]
enum Mutation {
    Set(usize, f64),
    SetInt(usize, i64),
    Drop(usize),
    Extra,
}

fn mutation() -> impl Strategy<Value = Mutation> {
    prop_oneof![
        4 => (0usize..8, -3.0f64..3.0).prop_map(|(i, x)| Mutation::Set(i, x)),
        2 => (0usize..8, -5i64..600).prop_map(|(i, x)| Mutation::SetInt(i, x)),
        1 => (0usize..8).prop_map(Mutation::Drop),
        1 => Just(Mutation::Extra),
    ]
}

fn apply(command: Command, inputs: &mut Value, m: &Mutation) {
    let fields = targets(command);
    match *m {
        Mutation::Set(i, x) => {
            if let Some(slot) = inputs.pointer_mut(fields[i % fields.len()]) {
                *slot = json!(x);
            }
        }
        Mutation::SetInt(i, x) => {
            if let Some(slot) = inputs.pointer_mut(fields[i % fields.len()]) {
                *slot = json!(x);
            }
        }
        Mutation::Drop(i) => {
            let key = fields[i % fields.len()].split('/').nth(1).unwrap();
            inputs.as_object_mut().unwrap().remove(key);
        }
        Mutation::Extra => {
            inputs["unexpected"] = json!(1);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn validate_predicts_execute(cmd in 0usize..9, seed in any::<u64>(), mutations in prop::collection::vec(mutation(), 0..3)) {
        let command = Command::ALL[cmd];
        let mut inputs = base(command);
        for m in &mutations {
            apply(command, &mut inputs, m);
        }
        let mut config = ExperimentConfig::new(command, inputs.clone());
        config.seed = seed;
        let diagnostics = harness::validate(&config);
        let result = harness::execute(&config);
        match (diagnostics.first(), result) {
            (None, Ok(_)) => {}
            (None, Err(e)) => prop_assert_eq!(e.family(), ErrorFamily::Numerical, "{} {}: {}", command, inputs, e),
            (Some(d), Err(e)) => prop_assert_eq!(d.code, e.code(), "{} {}", command, inputs),
            (Some(d), Ok(_)) => prop_assert!(false, "{} {}: validate reported {} but the run succeeded", command, inputs, d.code),
        }
    }
}
