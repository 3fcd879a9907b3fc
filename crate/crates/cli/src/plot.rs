//! Generated matplotlib scripts for tracking CSVs.

use std::fmt::Write as _;

const TEMPLATE: &str = r#"#!/usr/bin/env python3
"""Five panels per solver variant: path overlay, joint velocity, joint
acceleration, position error components and RMS error."""
import os

import matplotlib.pyplot as plt
import numpy as np

HERE = os.path.dirname(os.path.abspath(__file__))
RUNS = [__RUNS__]


def columns(data, prefix):
    return [n for n in data.dtype.names if n.startswith(prefix)]


fig, axes = plt.subplots(len(RUNS), 5, figsize=(22, 4 * len(RUNS)), squeeze=False)
for row, (label, name) in enumerate(RUNS):
    data = np.genfromtxt(os.path.join(HERE, name), delimiter=",", names=True)
    t = data["t"]
    pos = columns(data, "pos_")
    eps = columns(data, "eps_")
    ax = axes[row][0]
    desired = [data[p] - data[e] for p, e in zip(pos, eps)]
    ax.plot(desired[0], desired[1], "k--", label="desired")
    ax.plot(data[pos[0]], data[pos[1]], label="actual")
    ax.set_aspect("equal", adjustable="datalim")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    ax.set_title(label + ": end-effector path")
    ax.legend()
    for col, (prefix, title, unit) in enumerate(
        [("dtheta_", "joint velocity", "rad/s"), ("ddtheta_", "joint acceleration", "rad/s^2")], start=1
    ):
        ax = axes[row][col]
        for c in columns(data, prefix):
            ax.plot(t, data[c], label=c)
        ax.set_title(label + ": " + title)
        ax.set_xlabel("t (s)")
        ax.set_ylabel(unit)
    ax = axes[row][3]
    for c in eps:
        ax.plot(t, data[c], label=c)
    ax.set_title(label + ": position error")
    ax.set_xlabel("t (s)")
    ax.set_ylabel("m")
    ax.legend()
    ax = axes[row][4]
    ax.plot(t, data["rms"])
    ax.set_title(label + ": RMS error")
    ax.set_xlabel("t (s)")
    ax.set_ylabel("m")

fig.tight_layout()
fig.savefig(os.path.join(HERE, "__PNG__"), dpi=120)
plt.show()
"#;

/// Script plotting `(label, csv file name)` runs that live next to it and
/// saving the figure as `png`.
pub fn tracking_script(runs: &[(String, String)], png: &str) -> String {
    let mut list = String::new();
    for (label, file) in runs {
        let _ = write!(list, "({label:?}, {file:?}), ");
    }
    TEMPLATE.replace("__RUNS__", list.trim_end()).replace("__PNG__", png)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists_runs_and_figure() {
        let s = tracking_script(&[("ie".into(), "a_ie.csv".into()), ("z".into(), "a_z.csv".into())], "a.png");
        assert!(s.contains(r#"RUNS = [("ie", "a_ie.csv"), ("z", "a_z.csv"),]"#), "{s}");
        assert!(s.contains("\"a.png\""));
        assert!(!s.contains("__RUNS__") && !s.contains("__PNG__"));
    }
}
