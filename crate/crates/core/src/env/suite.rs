//! Built-in desk-scale MDPs with multi-modal returns.

use crate::env::spec::{MdpSpec, RewardAtom};
use crate::error::{Error, Result};

pub const BIMODAL_CHAIN: &str = "BimodalChain";
pub const SLIP_GRID: &str = "SlipGrid";
pub const TWO_ARM_TRAP: &str = "TwoArmTrap";

/// BimodalChain action ids.
pub const SAFE: usize = 0;
pub const RISKY: usize = 1;

/// TwoArmTrap action ids.
pub const STEADY_ARM: usize = 0;
pub const TRAP_ARM: usize = 1;

fn det(value: f64) -> Vec<RewardAtom> {
    vec![RewardAtom::new(value, 1.0)]
}

fn goto(n_states: usize, s: usize) -> Vec<f64> {
    let mut row = vec![0.0; n_states];
    row[s] = 1.0;
    row
}

/// Six decision states in a line followed by an absorbing terminal.
///
/// Both actions advance along the chain with zero reward. At the last
/// decision state `SAFE` pays a deterministic 0.6 and `RISKY` pays -1 or +2
/// with equal probability (mean 0.5), then the episode terminates.
pub fn bimodal_chain() -> MdpSpec {
    let len = 6;
    let n = len + 1;
    let terminal_state = len;
    let mut transition = Vec::with_capacity(n);
    let mut reward = Vec::with_capacity(n);
    for s in 0..n {
        if s == terminal_state {
            transition.push(vec![goto(n, s); 2]);
            reward.push(vec![det(0.0); 2]);
        } else {
            transition.push(vec![goto(n, s + 1); 2]);
            if s == len - 1 {
                reward.push(vec![
                    det(0.6),
                    vec![RewardAtom::new(-1.0, 0.5), RewardAtom::new(2.0, 0.5)],
                ]);
            } else {
                reward.push(vec![det(0.0); 2]);
            }
        }
    }
    let mut terminal = vec![false; n];
    terminal[terminal_state] = true;
    MdpSpec {
        name: BIMODAL_CHAIN.into(),
        n_states: n,
        n_actions: 2,
        transition,
        reward,
        terminal,
        horizon: len,
        start_state: 0,
        start_distribution: None,
    }
}

pub const GRID_SIDE: usize = 5;
pub const GRID_START: usize = 12;
pub const GRID_GOAL: usize = 24;
pub const GRID_PITS: [usize; 2] = [7, 18];
pub const GRID_SLIP: f64 = 0.1;

fn grid_move(s: usize, action: usize) -> usize {
    let (r, c) = (s / GRID_SIDE, s % GRID_SIDE);
    let (r, c) = match action {
        0 if r > 0 => (r - 1, c),
        1 if c + 1 < GRID_SIDE => (r, c + 1),
        2 if r + 1 < GRID_SIDE => (r + 1, c),
        3 if c > 0 => (r, c - 1),
        _ => (r, c),
    };
    r * GRID_SIDE + c
}

/// 5x5 gridworld with slippery moves.
///
/// Actions are up/right/down/left. The intended move happens with
/// probability 0.9; otherwise the agent moves to a uniformly chosen neighbor
/// (bumping into a wall means staying put). Acting in the goal cell pays +1
/// and acting in a pit pays -1; either way the agent drops into an absorbing
/// sink (state 25) that ends the episode.
pub fn slip_grid() -> MdpSpec {
    let cells = GRID_SIDE * GRID_SIDE;
    let sink = cells;
    let n = cells + 1;
    let mut transition = Vec::with_capacity(n);
    let mut reward = Vec::with_capacity(n);
    for s in 0..n {
        if s == sink || s == GRID_GOAL || GRID_PITS.contains(&s) {
            transition.push(vec![goto(n, sink); 4]);
            let pay = if s == GRID_GOAL {
                1.0
            } else if s == sink {
                0.0
            } else {
                -1.0
            };
            reward.push(vec![det(pay); 4]);
            continue;
        }
        let rows = (0..4)
            .map(|a| {
                let mut row = vec![0.0; n];
                row[grid_move(s, a)] += 1.0 - GRID_SLIP;
                for d in 0..4 {
                    row[grid_move(s, d)] += GRID_SLIP / 4.0;
                }
                row
            })
            .collect();
        transition.push(rows);
        reward.push(vec![det(0.0); 4]);
    }
    let mut terminal = vec![false; n];
    terminal[sink] = true;
    MdpSpec {
        name: SLIP_GRID.into(),
        n_states: n,
        n_actions: 4,
        transition,
        reward,
        terminal,
        horizon: 20,
        start_state: GRID_START,
        start_distribution: None,
    }
}

/// One-step two-armed bandit over two equally likely start states.
///
/// In each state both arms have the same mean. The steady arm pays its mean
/// deterministically; the trap arm pays `mean - 3.5` with probability 1/8
/// and `mean + 0.5` otherwise, a heavily left-skewed profile that a
/// mean-only critic cannot tell apart. State 1 is state 0 shifted down by one.
pub fn two_arm_trap() -> MdpSpec {
    let arms = |shift: f64| {
        vec![
            det(1.0 + shift),
            vec![
                RewardAtom::new(-2.5 + shift, 0.125),
                RewardAtom::new(1.5 + shift, 0.875),
            ],
        ]
    };
    MdpSpec {
        name: TWO_ARM_TRAP.into(),
        n_states: 2,
        n_actions: 2,
        transition: vec![vec![vec![0.5, 0.5]; 2]; 2],
        reward: vec![arms(0.0), arms(-1.0)],
        terminal: vec![false, false],
        horizon: 1,
        start_state: 0,
        start_distribution: Some(vec![0.5, 0.5]),
    }
}

pub fn builtin_suite() -> Vec<MdpSpec> {
    vec![bimodal_chain(), slip_grid(), two_arm_trap()]
}

fn canonical(name: &str) -> String {
    name.chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

/// Looks up a built-in spec by name, ignoring case and `-`/`_` separators.
pub fn builtin(name: &str) -> Option<MdpSpec> {
    let key = canonical(name);
    builtin_suite().into_iter().find(|s| canonical(&s.name) == key)
}

/// Resolves a built-in name, or loads a TOML spec from a path.
pub fn load_env(name_or_path: &str) -> Result<MdpSpec> {
    if let Some(spec) = builtin(name_or_path) {
        return Ok(spec);
    }
    let path = std::path::Path::new(name_or_path);
    if path.exists() {
        return MdpSpec::from_toml_file(path);
    }
    Err(Error::Config(format!(
        "unknown environment '{name_or_path}' (built-ins: {BIMODAL_CHAIN}, {SLIP_GRID}, {TWO_ARM_TRAP})"
    )))
}
