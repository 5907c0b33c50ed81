//! Small hand-built experts and runs shared by the harness tests and the
//! acceptance run.

use edgebench::envs::{self, EnvId, TaskConstants};
use edgebench::experts::{
    expert_return, ExpertController, GainFile, LoopOutput, PidExpert, PidGains, PidLoop, SetpointSource,
    TuningProvenance, TuningRule,
};

/// Proportional controller driving the integrator toy to the origin.
pub fn integrator_gains(kp: f64) -> GainFile {
    let controller = ExpertController::Pid(PidExpert {
        action_dim: 1,
        loops: vec![PidLoop {
            name: "x".into(),
            measure: 0,
            setpoint: SetpointSource::Const(0.0),
            output: LoopOutput::Action(0),
            direction: 1.0,
            bias: 0.0,
            output_limits: (-1.0, 1.0),
            wrap: false,
            gains: PidGains { kp, ..PidGains::ZERO },
        }],
    });
    let env = envs::make(EnvId::Integrator, &TaskConstants::builtin());
    let (j_exp, j_exp_std) = expert_return(env.as_ref(), &controller, 16).expect("integrator rollout");
    GainFile {
        task: EnvId::Integrator,
        controller,
        j_exp,
        j_exp_std,
        j_exp_seeds: 16,
        provenance: TuningProvenance {
            constants_version: TaskConstants::builtin().version,
            rule: TuningRule::default(),
            relay: Vec::new(),
            tuning_order: vec![0],
            operating_points: Vec::new(),
            selected: 0,
        },
    }
}
