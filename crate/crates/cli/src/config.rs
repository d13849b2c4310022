//! The TOML configuration document. `DEFAULT_CONFIG` is both the built-in
//! defaults and the key reference printed by `--help`.

use serde::Deserialize;
use toml::{Table, Value};

use quickdraw::baselines::{
    GpHyper, GpHyperGrid, GpParams, HyperOpt, RestlessParams, SlidingGreedyParams, SlidingUcbParams,
};
use quickdraw::envgen::FieldParams;
use quickdraw::harness::{ExperimentConfig, NamedPolicy, PolicyConfig};
use quickdraw::ope::{IpsOptions, SchemaMapping, SynthParams, UpdateRule};
use quickdraw::quickdraw::{GammaMode, QuickDrawParams};

pub const DEFAULT_CONFIG: &str = r#"# Master seed for field draws, warm-up, policy and noise streams (--seed).
seed = 0
# Seeds per ensemble; seed i runs on field seed + i (--seeds).
seeds = 20
# Uniform-random warm-up rounds fed to every policy before it acts.
warmup_rounds = 100
# Policies to run (--policies). Kinds: quickdraw, greedy, restless,
# sw_gp_ucb, sliding_ucb, random, oracle (simulation only).
policies = ["quickdraw", "greedy", "restless", "sw_gp_ucb", "random"]
# Directory for output CSV files (--out).
out = "."

[field]
rho_x = 0.1         # spatial correlation length on [-1, 1]
rho_t = 0.1         # temporal correlation length; inf gives a stationary field
alpha = 1.0         # sharpness exponent, >= 1
sigma_noise = 0.0   # Gaussian observation noise
k = 1000            # number of arms on a uniform grid over [-1, 1]
rounds = 1000       # horizon, warm-up included
tau_s = 0.001       # time step per round

[quickdraw]
ell_x = 1.0
ell_t = 1.0            # inf selects the stationary (cached) mode
rho2 = 1e-7
gamma_mode = "fixed"   # "fixed" or "theoretical"
gamma = 2.0            # used when gamma_mode = "fixed"
lipschitz = 1.0        # used when gamma_mode = "theoretical"
delta = 0.1            # used when gamma_mode = "theoretical"
truncation = inf       # drop observations whose scaled lag exceeds this
ceiling = 1.0          # upper clip of the index

[greedy]
epsilon = 0.1
window = 100

[restless]
sigma_r = 0.02         # drift scale per square-root round

[sw_gp_ucb]
window = 100           # 0 conditions on the full history
ucb_beta = 4.0
amplitude = 0.25       # kernel hyperparameters used when hyperopt = false
lengthscale = 0.1
noise = 0.01
hyperopt = true        # grid search by marginal likelihood every round
grid_lengthscales = [0.03, 0.1, 0.3, 1.0]
grid_amplitudes = [0.25, 1.0]
grid_noises = [0.0001, 0.01]
merge_duplicates = true  # collapse repeated pulls of an arm (exact, faster)

[sliding_ucb]
window = 100
xi = 0.5
bound = 1.0

[sweep]
var = "sigma_noise"    # sigma_noise, alpha, rho_x, rho_t, ell_x or ell_t (--var)
values = []            # values to sweep (--values)

[bench]
k = 1000
tmax = [100, 250, 500] # horizons to time (--tmax)

[ope]
log = ""               # logged-data CSV; the LOG argument overrides
n_trials = 10
update = "all"         # replay learns from "all" events or only "matched" ones
max_weight = inf       # importance-weight cap

[ope.schema]
timestamp = "timestamp"
action = "action"
reward = "reward"
pscore = "pscore"
item_feature = "item_feature"
user_features = ["user_feature_0"]

[ope.synthetic]         # the --synthetic log; its seed is the master seed
k = 46
groups = 4
events_per_group = 25000
rho_x = 0.05
rho_t = 0.2
alpha = 3.0
max_ctr = 0.2
time_points = 200
"#;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    pub seed: u64,
    pub seeds: usize,
    pub warmup_rounds: usize,
    pub policies: Vec<String>,
    pub out: String,
    pub field: FieldSection,
    pub quickdraw: QuickDrawSection,
    pub greedy: GreedySection,
    pub restless: RestlessSection,
    pub sw_gp_ucb: GpSection,
    pub sliding_ucb: SlidingUcbSection,
    pub sweep: SweepSection,
    pub bench: BenchSection,
    pub ope: OpeSection,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSection {
    pub rho_x: f64,
    pub rho_t: f64,
    pub alpha: f64,
    pub sigma_noise: f64,
    pub k: usize,
    pub rounds: usize,
    pub tau_s: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuickDrawSection {
    pub ell_x: f64,
    pub ell_t: f64,
    pub rho2: f64,
    pub gamma_mode: String,
    pub gamma: f64,
    pub lipschitz: f64,
    pub delta: f64,
    pub truncation: f64,
    pub ceiling: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GreedySection {
    pub epsilon: f64,
    pub window: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RestlessSection {
    pub sigma_r: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GpSection {
    pub window: usize,
    pub ucb_beta: f64,
    pub amplitude: f64,
    pub lengthscale: f64,
    pub noise: f64,
    pub hyperopt: bool,
    pub grid_lengthscales: Vec<f64>,
    pub grid_amplitudes: Vec<f64>,
    pub grid_noises: Vec<f64>,
    pub merge_duplicates: bool,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlidingUcbSection {
    pub window: usize,
    pub xi: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub var: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSection {
    pub k: usize,
    pub tmax: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpeSection {
    pub log: String,
    pub n_trials: usize,
    pub update: String,
    pub max_weight: f64,
    pub schema: SchemaSection,
    pub synthetic: SyntheticSection,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaSection {
    pub timestamp: String,
    pub action: String,
    pub reward: String,
    pub pscore: String,
    pub item_feature: String,
    pub user_features: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSection {
    pub k: usize,
    pub groups: usize,
    pub events_per_group: usize,
    pub rho_x: f64,
    pub rho_t: f64,
    pub alpha: f64,
    pub max_ctr: f64,
    pub time_points: usize,
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::String(_) => "string",
        Value::Integer(_) => "integer",
        Value::Float(_) => "float",
        Value::Boolean(_) => "boolean",
        Value::Datetime(_) => "datetime",
        Value::Array(_) => "array",
        Value::Table(_) => "table",
    }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

/// Overlay `user` onto `base`, rejecting keys `base` lacks and values of
/// the wrong type. Integers are accepted where floats are expected.
fn overlay(base: &mut Table, user: Table, path: &str) -> Result<(), String> {
    for (key, value) in user {
        let here = join(path, &key);
        let Some(slot) = base.get_mut(&key) else {
            return Err(if path.is_empty() {
                format!("unknown key: {key}")
            } else {
                format!("unknown key: {key} (in [{path}])")
            });
        };
        match (slot, value) {
            (Value::Table(b), Value::Table(u)) => overlay(b, u, &here)?,
            (slot @ Value::Float(_), Value::Integer(i)) => *slot = Value::Float(i as f64),
            (slot @ Value::Array(_), Value::Array(items)) => {
                let want = slot.as_array().and_then(|a| a.first()).map(type_name);
                let mut converted = Vec::with_capacity(items.len());
                for item in items {
                    converted.push(match (want, item) {
                        (Some("float"), Value::Integer(i)) => Value::Float(i as f64),
                        (Some(w), item) if w != type_name(&item) => {
                            return Err(format!("{here}: expected an array of {w}s, found a {}", type_name(&item)));
                        }
                        (_, item) => item,
                    });
                }
                *slot = Value::Array(converted);
            }
            (slot, value) => {
                if type_name(slot) != type_name(&value) {
                    return Err(format!("{here}: expected {}, found {}", type_name(slot), type_name(&value)));
                }
                *slot = value;
            }
        }
    }
    Ok(())
}

impl Default for CliConfig {
    fn default() -> Self {
        Self::parse("").expect("built-in defaults parse")
    }
}

impl CliConfig {
    /// Parse a config document on top of the built-in defaults.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut base: Table = DEFAULT_CONFIG.parse().map_err(|e| format!("built-in defaults: {e}"))?;
        let user: Table = text.parse().map_err(|e: toml::de::Error| format!("config parse error: {e}"))?;
        overlay(&mut base, user, "")?;
        base.try_into().map_err(|e: toml::de::Error| format!("config error: {e}"))
    }

    pub fn field_params(&self) -> FieldParams {
        let f = &self.field;
        FieldParams {
            rho_x: f.rho_x,
            rho_t: f.rho_t,
            alpha: f.alpha,
            sigma_noise: f.sigma_noise,
            k: f.k,
            rounds: f.rounds,
            tau_s: f.tau_s,
            seed: self.seed,
        }
    }

    pub fn quickdraw_params(&self) -> Result<QuickDrawParams, String> {
        let q = &self.quickdraw;
        let gamma = match q.gamma_mode.as_str() {
            "fixed" => GammaMode::Fixed(q.gamma),
            "theoretical" => GammaMode::Theoretical { lipschitz: q.lipschitz, delta: q.delta },
            other => return Err(format!("quickdraw.gamma_mode: expected \"fixed\" or \"theoretical\", got {other:?}")),
        };
        Ok(QuickDrawParams {
            ell_x: q.ell_x,
            ell_t: q.ell_t,
            rho2: q.rho2,
            gamma,
            truncation: q.truncation.is_finite().then_some(q.truncation),
            ceiling: q.ceiling,
        })
    }

    pub fn gp_params(&self) -> GpParams {
        let g = &self.sw_gp_ucb;
        GpParams {
            window: (g.window > 0).then_some(g.window),
            hyper: GpHyper { amplitude: g.amplitude, lengthscale: g.lengthscale, noise: g.noise },
            ucb_beta: g.ucb_beta,
            hyperopt: if g.hyperopt {
                HyperOpt::Grid(GpHyperGrid {
                    lengthscales: g.grid_lengthscales.clone(),
                    amplitudes: g.grid_amplitudes.clone(),
                    noises: g.grid_noises.clone(),
                })
            } else {
                HyperOpt::None
            },
            merge_duplicates: g.merge_duplicates,
        }
    }

    pub fn policy(&self, kind: &str) -> Result<NamedPolicy, String> {
        let config = match kind {
            "random" => PolicyConfig::Random,
            "quickdraw" => PolicyConfig::QuickDraw(self.quickdraw_params()?),
            "greedy" => {
                PolicyConfig::Greedy(SlidingGreedyParams { epsilon: self.greedy.epsilon, window: self.greedy.window })
            }
            "restless" => PolicyConfig::Restless(RestlessParams { sigma_r: self.restless.sigma_r }),
            "sw_gp_ucb" => PolicyConfig::SwGpUcb(self.gp_params()),
            "sliding_ucb" => PolicyConfig::SlidingUcb(SlidingUcbParams {
                window: self.sliding_ucb.window,
                xi: self.sliding_ucb.xi,
                bound: self.sliding_ucb.bound,
            }),
            "oracle" => PolicyConfig::Oracle,
            other => return Err(format!("unknown policy: {other}")),
        };
        Ok(NamedPolicy::new(kind, config))
    }

    pub fn policies(&self) -> Result<Vec<NamedPolicy>, String> {
        if self.policies.is_empty() {
            return Err("no policies selected".into());
        }
        let mut seen = std::collections::HashSet::new();
        self.policies
            .iter()
            .map(|p| {
                if !seen.insert(p.as_str()) {
                    return Err(format!("policy listed twice: {p}"));
                }
                self.policy(p)
            })
            .collect()
    }

    pub fn experiment(&self) -> Result<ExperimentConfig, String> {
        Ok(ExperimentConfig {
            field: self.field_params(),
            policies: self.policies()?,
            warmup_rounds: self.warmup_rounds,
            n_seeds: self.seeds,
            seed_base: self.seed,
        })
    }

    pub fn ips_options(&self) -> Result<IpsOptions, String> {
        let update = UpdateRule::parse(&self.ope.update).map_err(|e| format!("ope.update: {e}"))?;
        Ok(IpsOptions {
            n_trials: self.ope.n_trials,
            seed: self.seed,
            update,
            max_weight: self.ope.max_weight.is_finite().then_some(self.ope.max_weight),
        })
    }

    pub fn schema(&self) -> SchemaMapping {
        let s = &self.ope.schema;
        SchemaMapping {
            timestamp: s.timestamp.clone(),
            action: s.action.clone(),
            reward: s.reward.clone(),
            pscore: s.pscore.clone(),
            item_feature: s.item_feature.clone(),
            user_features: s.user_features.clone(),
        }
    }

    pub fn synth_params(&self) -> SynthParams {
        let s = &self.ope.synthetic;
        SynthParams {
            k: s.k,
            groups: s.groups,
            events_per_group: s.events_per_group,
            rho_x: s.rho_x,
            rho_t: s.rho_t,
            alpha: s.alpha,
            max_ctr: s.max_ctr,
            time_points: s.time_points,
            seed: self.seed,
        }
    }
}
