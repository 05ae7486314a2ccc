//! Runtime state machines behind the three heuristic hook points.
//!
//! Each policy is instantiated from a validated [`HeuristicGenome`] and driven
//! by the search loop: the restart policy sees every learned-clause LBD and
//! answers "restart now?" after each conflict; the rephase policy supplies a
//! period and a saved-phase transformation; the bump policy owns the activity
//! bookkeeping performed once per conflict.

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::portfolio::{builtin_families, HeuristicGenome, Module, PortfolioError};

/// Activity threshold that triggers a uniform rescale.
const RESCALE_LIMIT: f64 = 1e100;
const RESCALE_FACTOR: f64 = 1e-100;
/// Conflicts between halvings of the recent-participation counters.
const PARTICIPATION_HALF_LIFE: u64 = 256;

fn validated(genome: &HeuristicGenome, module: Module) -> Result<(), PortfolioError> {
    if genome.module != module {
        return Err(PortfolioError::WrongModule {
            family: genome.family.clone(),
            module: genome.module,
            expected: module,
        });
    }
    builtin_families().validate(genome)
}

/// Decides when to abandon the current search path.
#[derive(Debug)]
pub enum RestartPolicy {
    Luby {
        unit: u64,
        luby: LubySequence,
        current: u64,
    },
    Geometric {
        interval: f64,
        growth: f64,
    },
    Fixed {
        interval: u64,
    },
    LbdDynamic {
        window: usize,
        factor: f64,
        recent: VecDeque<u32>,
        recent_sum: u64,
        global_sum: u64,
        global_count: u64,
    },
}

impl RestartPolicy {
    pub fn from_genome(genome: &HeuristicGenome) -> Result<Self, PortfolioError> {
        validated(genome, Module::Restart)?;
        Ok(match genome.family.as_str() {
            "luby" => {
                let mut luby = LubySequence::new();
                let current = luby.next();
                RestartPolicy::Luby {
                    unit: genome.param("u") as u64,
                    luby,
                    current,
                }
            }
            "geometric" => RestartPolicy::Geometric {
                interval: genome.param("c"),
                growth: genome.param("g"),
            },
            "fixed" => RestartPolicy::Fixed {
                interval: genome.param("c") as u64,
            },
            "lbd_dynamic" => RestartPolicy::LbdDynamic {
                window: genome.param("w") as usize,
                factor: genome.param("k"),
                recent: VecDeque::new(),
                recent_sum: 0,
                global_sum: 0,
                global_count: 0,
            },
            other => unreachable!("validated family {other}"),
        })
    }

    /// Feeds the LBD of the clause learned at this conflict.
    pub fn on_conflict(&mut self, lbd: u32) {
        if let RestartPolicy::LbdDynamic {
            window,
            recent,
            recent_sum,
            global_sum,
            global_count,
            ..
        } = self
        {
            recent.push_back(lbd);
            *recent_sum += u64::from(lbd);
            if recent.len() > *window {
                *recent_sum -= u64::from(recent.pop_front().expect("non-empty"));
            }
            *global_sum += u64::from(lbd);
            *global_count += 1;
        }
    }

    /// Pure decision given the number of conflicts since the last restart.
    pub fn should_restart(&self, conflicts_since_restart: u64) -> bool {
        match self {
            RestartPolicy::Luby { unit, current, .. } => {
                conflicts_since_restart >= unit * current
            }
            RestartPolicy::Geometric { interval, .. } => {
                conflicts_since_restart as f64 >= *interval
            }
            RestartPolicy::Fixed { interval } => conflicts_since_restart >= *interval,
            RestartPolicy::LbdDynamic {
                window,
                factor,
                recent,
                recent_sum,
                global_sum,
                global_count,
                ..
            } => {
                if recent.len() < *window || *global_count == 0 {
                    return false;
                }
                let recent_mean = *recent_sum as f64 / recent.len() as f64;
                let global_mean = *global_sum as f64 / *global_count as f64;
                recent_mean * factor > global_mean
            }
        }
    }

    /// Advances internal schedules after a restart was taken.
    pub fn on_restart(&mut self) {
        match self {
            RestartPolicy::Luby { luby, current, .. } => *current = luby.next(),
            RestartPolicy::Geometric {
                interval, growth, ..
            } => *interval *= *growth,
            RestartPolicy::Fixed { .. } => {}
            RestartPolicy::LbdDynamic {
                recent, recent_sum, ..
            } => {
                recent.clear();
                *recent_sum = 0;
            }
        }
    }
}

/// The 1,1,2,1,1,2,4,... reluctant-doubling sequence.
#[derive(Debug)]
pub struct LubySequence {
    u: u64,
    v: u64,
}

impl LubySequence {
    pub fn new() -> Self {
        LubySequence { u: 1, v: 1 }
    }

    pub fn next(&mut self) -> u64 {
        let term = self.v;
        if self.u & self.u.wrapping_neg() == self.v {
            self.u += 1;
            self.v = 1;
        } else {
            self.v *= 2;
        }
        term
    }
}

impl Default for LubySequence {
    fn default() -> Self {
        Self::new()
    }
}

/// Periodically rewrites the saved phases used as branching defaults.
#[derive(Debug)]
pub enum RephasePolicy {
    None,
    ResetFalse { period: u64 },
    Flip { period: u64 },
    Random { period: u64, prob: f64 },
}

impl RephasePolicy {
    pub fn from_genome(genome: &HeuristicGenome) -> Result<Self, PortfolioError> {
        validated(genome, Module::Rephase)?;
        Ok(match genome.family.as_str() {
            "none" => RephasePolicy::None,
            "reset_false" => RephasePolicy::ResetFalse {
                period: genome.param("r") as u64,
            },
            "flip" => RephasePolicy::Flip {
                period: genome.param("r") as u64,
            },
            "random" => RephasePolicy::Random {
                period: genome.param("r") as u64,
                prob: genome.param("p"),
            },
            other => unreachable!("validated family {other}"),
        })
    }

    /// Conflict-count period between applications; `None` disables the hook.
    pub fn period(&self) -> Option<u64> {
        match self {
            RephasePolicy::None => None,
            RephasePolicy::ResetFalse { period }
            | RephasePolicy::Flip { period }
            | RephasePolicy::Random { period, .. } => Some(*period),
        }
    }

    /// Rewrites saved phases in place. Only the phase array is touched.
    pub fn apply(&self, phases: &mut [bool], rng: &mut ChaCha8Rng) {
        match self {
            RephasePolicy::None => {}
            RephasePolicy::ResetFalse { .. } => phases.fill(false),
            RephasePolicy::Flip { .. } => {
                for phase in phases.iter_mut() {
                    *phase = !*phase;
                }
            }
            RephasePolicy::Random { prob, .. } => {
                for phase in phases.iter_mut() {
                    if rng.random_bool(*prob) {
                        *phase = rng.random_bool(0.5);
                    }
                }
            }
        }
    }
}

/// Variable activity scores plus the bump/decay machinery.
#[derive(Debug)]
pub struct ActivityState {
    pub activity: Vec<f64>,
    increment: f64,
    /// Exponentially halved conflict-participation counters, only maintained
    /// for the conflict_frequency policy.
    participation: Vec<f64>,
    conflicts_since_halve: u64,
}

impl ActivityState {
    pub fn new(num_vars: usize) -> Self {
        ActivityState {
            activity: vec![0.0; num_vars],
            increment: 1.0,
            participation: Vec::new(),
            conflicts_since_halve: 0,
        }
    }

    fn rescale(&mut self) {
        for a in &mut self.activity {
            *a *= RESCALE_FACTOR;
        }
        self.increment *= RESCALE_FACTOR;
    }
}

/// How conflict variables get their activity bumped.
#[derive(Debug, Clone, Copy)]
pub enum BumpPolicy {
    ClassicVsids { decay: f64 },
    ReasonSide { decay: f64, beta: f64 },
    ConflictFrequency { decay: f64, bonus: f64 },
}

impl BumpPolicy {
    pub fn from_genome(genome: &HeuristicGenome) -> Result<Self, PortfolioError> {
        validated(genome, Module::BumpVar)?;
        Ok(match genome.family.as_str() {
            "classic_vsids" => BumpPolicy::ClassicVsids {
                decay: genome.param("d"),
            },
            "reason_side" => BumpPolicy::ReasonSide {
                decay: genome.param("d"),
                beta: genome.param("beta"),
            },
            "conflict_frequency" => BumpPolicy::ConflictFrequency {
                decay: genome.param("d"),
                bonus: genome.param("b"),
            },
            other => unreachable!("validated family {other}"),
        })
    }

    /// Applies one conflict's worth of bumps and decays the increment.
    /// `learned` holds the variables of the learned clause, `reason_side` the
    /// current-level variables resolved away during analysis. Returns true if
    /// activities were rescaled.
    pub fn bump(&self, state: &mut ActivityState, learned: &[usize], reason_side: &[usize]) -> bool {
        let inc = state.increment;
        match self {
            BumpPolicy::ClassicVsids { .. } => {
                for &v in learned {
                    state.activity[v] += inc;
                }
            }
            BumpPolicy::ReasonSide { beta, .. } => {
                for &v in learned {
                    state.activity[v] += inc;
                }
                if *beta > 0.0 {
                    for &v in reason_side {
                        state.activity[v] += beta * inc;
                    }
                }
            }
            BumpPolicy::ConflictFrequency { bonus, .. } => {
                if state.participation.is_empty() {
                    state.participation = vec![0.0; state.activity.len()];
                }
                state.conflicts_since_halve += 1;
                if state.conflicts_since_halve >= PARTICIPATION_HALF_LIFE {
                    for p in &mut state.participation {
                        *p *= 0.5;
                    }
                    state.conflicts_since_halve = 0;
                }
                for &v in learned {
                    state.activity[v] += inc * (1.0 + bonus * state.participation[v]);
                    state.participation[v] += 1.0;
                }
            }
        }
        let decay = match self {
            BumpPolicy::ClassicVsids { decay }
            | BumpPolicy::ReasonSide { decay, .. }
            | BumpPolicy::ConflictFrequency { decay, .. } => *decay,
        };
        state.increment /= decay;

        let overflow = learned
            .iter()
            .chain(reason_side)
            .any(|&v| state.activity[v] > RESCALE_LIMIT)
            || state.increment > RESCALE_LIMIT;
        if overflow {
            state.rescale();
        }
        overflow
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn genome(module: Module, family: &str, params: &[(&str, f64)]) -> HeuristicGenome {
        HeuristicGenome::new(module, family, params)
    }

    /// Direct recursive definition of the Luby sequence, as an oracle.
    fn luby_reference(i: u64) -> u64 {
        let mut k = 1u32;
        loop {
            if i == (1 << k) - 1 {
                return 1 << (k - 1);
            }
            if i < (1 << k) - 1 {
                return luby_reference(i - (1 << (k - 1)) + 1);
            }
            k += 1;
        }
    }

    #[test]
    fn luby_sequence_matches_reference() {
        let mut seq = LubySequence::new();
        for i in 1..=200 {
            assert_eq!(seq.next(), luby_reference(i), "term {i}");
        }
    }

    #[test]
    fn luby_restart_first_interval() {
        // u=2, first Luby term is 1 => interval 2.
        let policy =
            RestartPolicy::from_genome(&genome(Module::Restart, "luby", &[("u", 2.0)])).unwrap();
        assert!(!policy.should_restart(1));
        assert!(policy.should_restart(2));
    }

    #[test]
    fn fixed_restart_below_interval() {
        let policy =
            RestartPolicy::from_genome(&genome(Module::Restart, "fixed", &[("c", 100.0)]))
                .unwrap();
        assert!(!policy.should_restart(99));
        assert!(policy.should_restart(100));
    }

    #[test]
    fn geometric_second_interval_grows() {
        let mut policy = RestartPolicy::from_genome(&genome(
            Module::Restart,
            "geometric",
            &[("c", 100.0), ("g", 1.5)],
        ))
        .unwrap();
        assert!(policy.should_restart(100));
        policy.on_restart();
        assert!(!policy.should_restart(149));
        assert!(policy.should_restart(150));
    }

    #[test]
    fn lbd_dynamic_triggers_on_high_recent_mean() {
        let mut policy = RestartPolicy::from_genome(&genome(
            Module::Restart,
            "lbd_dynamic",
            &[("w", 10.0), ("k", 1.0)],
        ))
        .unwrap();
        // Long calm prefix, then a burst of high-LBD clauses.
        for _ in 0..100 {
            policy.on_conflict(2);
        }
        assert!(!policy.should_restart(100));
        for _ in 0..10 {
            policy.on_conflict(20);
        }
        assert!(policy.should_restart(110));
        policy.on_restart();
        // Window cleared: no decision until it refills.
        assert!(!policy.should_restart(0));
    }

    #[test]
    fn rephase_reset_flip_none() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut phases = vec![true, false, true];

        let reset =
            RephasePolicy::from_genome(&genome(Module::Rephase, "reset_false", &[("r", 100.0)]))
                .unwrap();
        reset.apply(&mut phases, &mut rng);
        assert_eq!(phases, vec![false, false, false]);

        let flip = RephasePolicy::from_genome(&genome(Module::Rephase, "flip", &[("r", 100.0)]))
            .unwrap();
        let mut phases = vec![true, false, true];
        flip.apply(&mut phases, &mut rng);
        assert_eq!(phases, vec![false, true, false]);
        flip.apply(&mut phases, &mut rng);
        assert_eq!(phases, vec![true, false, true], "flip is an involution");

        let none = RephasePolicy::from_genome(&genome(Module::Rephase, "none", &[])).unwrap();
        let before = phases.clone();
        none.apply(&mut phases, &mut rng);
        assert_eq!(phases, before);
        assert_eq!(none.period(), None);
    }

    #[test]
    fn random_rephase_is_seed_deterministic() {
        let policy = RephasePolicy::from_genome(&genome(
            Module::Rephase,
            "random",
            &[("r", 100.0), ("p", 0.5)],
        ))
        .unwrap();
        let mut a = vec![false; 64];
        let mut b = vec![false; 64];
        policy.apply(&mut a, &mut ChaCha8Rng::seed_from_u64(7));
        policy.apply(&mut b, &mut ChaCha8Rng::seed_from_u64(7));
        assert_eq!(a, b);
    }

    #[test]
    fn classic_vsids_bumps_learned_and_decays() {
        let policy =
            BumpPolicy::from_genome(&genome(Module::BumpVar, "classic_vsids", &[("d", 0.95)]))
                .unwrap();
        let mut state = ActivityState::new(10);
        policy.bump(&mut state, &[3, 7], &[1]);
        assert_eq!(state.activity[3], 1.0);
        assert_eq!(state.activity[7], 1.0);
        assert_eq!(state.activity[1], 0.0, "classic ignores the reason side");
        // Next bump uses the decayed (grown) increment.
        policy.bump(&mut state, &[3], &[]);
        assert!((state.activity[3] - (1.0 + 1.0 / 0.95)).abs() < 1e-12);
    }

    #[test]
    fn reason_side_beta_zero_equals_classic() {
        let classic =
            BumpPolicy::from_genome(&genome(Module::BumpVar, "classic_vsids", &[("d", 0.9)]))
                .unwrap();
        let reason = BumpPolicy::from_genome(&genome(
            Module::BumpVar,
            "reason_side",
            &[("d", 0.9), ("beta", 0.0)],
        ))
        .unwrap();
        let mut a = ActivityState::new(8);
        let mut b = ActivityState::new(8);
        let conflicts: &[(&[usize], &[usize])] =
            &[(&[0, 3], &[1, 2]), (&[5], &[0]), (&[2, 6, 7], &[3, 4])];
        for (learned, side) in conflicts {
            classic.bump(&mut a, learned, side);
            reason.bump(&mut b, learned, side);
        }
        assert_eq!(a.activity, b.activity);
    }

    #[test]
    fn reason_side_bumps_resolved_vars() {
        let policy = BumpPolicy::from_genome(&genome(
            Module::BumpVar,
            "reason_side",
            &[("d", 0.95), ("beta", 0.5)],
        ))
        .unwrap();
        let mut state = ActivityState::new(4);
        policy.bump(&mut state, &[0], &[1]);
        assert_eq!(state.activity[0], 1.0);
        assert_eq!(state.activity[1], 0.5);
    }

    #[test]
    fn conflict_frequency_adds_participation_bonus() {
        let policy = BumpPolicy::from_genome(&genome(
            Module::BumpVar,
            "conflict_frequency",
            &[("d", 0.95), ("b", 1.0)],
        ))
        .unwrap();
        let mut state = ActivityState::new(4);
        policy.bump(&mut state, &[2], &[]);
        assert_eq!(state.activity[2], 1.0, "first bump has no history");
        let inc = 1.0 / 0.95;
        policy.bump(&mut state, &[2], &[]);
        assert!((state.activity[2] - (1.0 + inc * 2.0)).abs() < 1e-12);
    }

    #[test]
    fn rescale_preserves_argmax() {
        let policy =
            BumpPolicy::from_genome(&genome(Module::BumpVar, "classic_vsids", &[("d", 0.5)]))
                .unwrap();
        let mut state = ActivityState::new(4);
        state.activity = vec![1.0, 3.0, 2.0, 0.5];
        let argmax_before = 1;
        // Doubling increments overflow the limit quickly.
        let mut rescaled = false;
        for _ in 0..400 {
            rescaled |= policy.bump(&mut state, &[1], &[]);
        }
        assert!(rescaled, "rescale must have triggered");
        let argmax_after = state
            .activity
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(argmax_before, argmax_after);
        assert!(state.activity.iter().all(|a| a.is_finite() && *a >= 0.0));
    }
}
