//! Small named instances with known answers, used by tests, benches and the CLI
//! fixture files.

use crate::model::{default_labels, ActionRow, MdpInstance, NonnegMatrix};

fn labels(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn row(action: usize, prob: &[f64], reward: &[f64]) -> ActionRow {
    ActionRow {
        action,
        prob: prob.to_vec(),
        reward: reward.to_vec(),
    }
}

/// Uniform kernel, reward `log 2` out of state 0 and 0 out of state 1:
/// `Q = [[1,1],[0.5,0.5]]`, `ρ = 1.5`.
pub fn two_state() -> MdpInstance {
    let l2 = 2f64.ln();
    MdpInstance::new(
        labels(&["s0", "s1"]),
        labels(&["a"]),
        vec![
            vec![row(0, &[0.5, 0.5], &[l2, l2])],
            vec![row(0, &[0.5, 0.5], &[0.0, 0.0])],
        ],
    )
    .unwrap()
}

/// Uncontrolled `Q = [[1,0],[0.5,2]]`: growth 0 from state 0, `log 2` from state 1.
pub fn triangular() -> MdpInstance {
    MdpInstance::new(
        labels(&["s0", "s1"]),
        labels(&["a"]),
        vec![
            vec![row(0, &[1.0, 0.0], &[0.0, 0.0])],
            vec![row(0, &[0.5, 0.5], &[0.0, 4f64.ln()])],
        ],
    )
    .unwrap()
}

/// State 0 chooses between `a` (reward 2) and `b` (reward 0), both uniform;
/// state 1 has only `a` with reward 0. Optimal `ρ = (e² + 1)/2`.
pub fn dominating() -> MdpInstance {
    MdpInstance::new(
        labels(&["s0", "s1"]),
        labels(&["a", "b"]),
        vec![
            vec![
                row(0, &[0.5, 0.5], &[2.0, 2.0]),
                row(1, &[0.5, 0.5], &[0.0, 0.0]),
            ],
            vec![row(0, &[0.5, 0.5], &[0.0, 0.0])],
        ],
    )
    .unwrap()
}

/// Three states, two actions, all rewards zero.
pub fn zero_reward() -> MdpInstance {
    let z = [0.0; 3];
    MdpInstance::new(
        labels(&["s0", "s1", "s2"]),
        labels(&["a", "b"]),
        vec![
            vec![row(0, &[0.2, 0.8, 0.0], &z), row(1, &[0.0, 0.0, 1.0], &z)],
            vec![row(0, &[0.5, 0.0, 0.5], &z)],
            vec![row(0, &[1.0, 0.0, 0.0], &z), row(1, &[0.3, 0.3, 0.4], &z)],
        ],
    )
    .unwrap()
}

/// Path counting on a digraph: uniform kernel over all states, reward
/// `log n` on edges and `-inf` elsewhere, so `Q` is the adjacency matrix.
pub fn directed_paths(adjacency: &[Vec<bool>]) -> MdpInstance {
    let n = adjacency.len();
    let ln_n = (n as f64).ln();
    let rows = adjacency
        .iter()
        .map(|edges| {
            let reward = edges
                .iter()
                .map(|&e| if e { ln_n } else { f64::NEG_INFINITY })
                .collect();
            vec![ActionRow {
                action: 0,
                prob: vec![1.0 / n as f64; n],
                reward,
            }]
        })
        .collect();
    MdpInstance::new(default_labels("v", n), labels(&["step"]), rows).unwrap()
}

/// Complete digraph with self-loops on `n` vertices: `Q` is all ones, `ρ = n`.
pub fn complete_digraph(n: usize) -> MdpInstance {
    directed_paths(&vec![vec![true; n]; n])
}

/// Directed 2-cycle: exactly one path of each length, growth 0.
pub fn two_cycle() -> MdpInstance {
    directed_paths(&[vec![false, true], vec![true, false]])
}

/// Uncontrolled `Q = [[1,1],[0,1]]`: two chained classes of equal growth.
pub fn chained() -> MdpInstance {
    MdpInstance::uncontrolled(
        &NonnegMatrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap(),
    )
}

/// Irreducible support union whose greedy policy is reducible: state 0 has a
/// rewarding self-loop `a` and a link `b` to state 1, which returns to 0.
pub fn greedy_trap() -> MdpInstance {
    MdpInstance::new(
        labels(&["s0", "s1"]),
        labels(&["a", "b"]),
        vec![
            vec![row(0, &[1.0, 0.0], &[1.0, 0.0]), row(1, &[0.0, 1.0], &[0.0, 0.0])],
            vec![row(0, &[1.0, 0.0], &[0.0, 0.0])],
        ],
    )
    .unwrap()
}

/// Every named fixture, for sweeps.
pub fn all() -> Vec<(&'static str, MdpInstance)> {
    vec![
        ("two_state", two_state()),
        ("triangular", triangular()),
        ("dominating", dominating()),
        ("zero_reward", zero_reward()),
        ("complete4", complete_digraph(4)),
        ("two_cycle", two_cycle()),
        ("chained", chained()),
        ("greedy_trap", greedy_trap()),
    ]
}
