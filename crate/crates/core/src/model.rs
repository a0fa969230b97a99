//! Block-diagonal Koopman model: a diagonal Hamiltonian plus an optional
//! per-subsystem uniform phase drift, and its `.qkham` text form.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::layout::{ObservableState, SubsystemLayout};
use crate::unitary::{block_evolve, DiagonalHamiltonian};

#[derive(Debug, Clone, PartialEq)]
pub struct KoopmanModel {
    hamiltonian: DiagonalHamiltonian,
    /// Radians per unit time, one entry per subsystem. Added to every phase
    /// of the block as a scalar, never as a gate.
    global_phase: Option<Vec<f64>>,
}

impl KoopmanModel {
    pub fn new(hamiltonian: DiagonalHamiltonian, global_phase: Option<Vec<f64>>) -> Result<Self> {
        if let Some(g) = &global_phase {
            if g.len() != hamiltonian.layout().subsystem_count() {
                return Err(Error::Layout(format!(
                    "{} global phase rates for {} subsystems",
                    g.len(),
                    hamiltonian.layout().subsystem_count()
                )));
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain("non-finite global phase rate".into()));
            }
        }
        Ok(Self {
            hamiltonian,
            global_phase,
        })
    }

    pub fn hamiltonian(&self) -> &DiagonalHamiltonian {
        &self.hamiltonian
    }

    pub fn layout(&self) -> &SubsystemLayout {
        self.hamiltonian.layout()
    }

    pub fn global_phase(&self) -> Option<&[f64]> {
        self.global_phase.as_deref()
    }

    /// Evolves the observable for time `t` in one shot.
    pub fn evolve(&self, state: &ObservableState, t: f64) -> Result<ObservableState> {
        let evolved = block_evolve(state, &self.hamiltonian, t)?;
        let Some(global) = &self.global_phase else {
            return Ok(evolved);
        };
        let mut phase = evolved.phase().to_vec();
        for (j, g) in global.iter().enumerate() {
            let shift = g * t;
            for p in &mut phase[self.layout().range(j)?] {
                *p += shift;
            }
        }
        evolved.with_phase(phase)
    }

    /// `.qkham` text: `layout <d> <c> <h>`, `global_phase <none|g_0 .. g_{h-1}>`,
    /// then one `alpha <j> <k> <value>` line per coefficient.
    pub fn to_qkham(&self) -> String {
        let layout = self.layout();
        let mut out = format!(
            "layout {} {} {}\n",
            layout.state_dim(),
            layout.channels(),
            layout.subsystem_count()
        );
        match &self.global_phase {
            None => out.push_str("global_phase none\n"),
            Some(g) => {
                out.push_str("global_phase");
                for v in g {
                    write!(out, " {v:.16e}").unwrap();
                }
                out.push('\n');
            }
        }
        for (j, block) in self.hamiltonian.alphas().iter().enumerate() {
            for (k, a) in block.iter().enumerate() {
                writeln!(out, "alpha {j} {k} {a:.16e}").unwrap();
            }
        }
        out
    }

    pub fn from_qkham(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .enumerate()
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let bad = |no: usize, what: &str| Error::Parse(format!("line {}: {what}", no + 1));

        let (no, line) = lines.next().ok_or_else(|| Error::Parse("empty .qkham file".into()))?;
        let layout = match line.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["layout", d, c, h] => {
                let num = |s: &str| s.parse::<usize>().map_err(|_| bad(no, "bad layout integer"));
                SubsystemLayout::new(num(d)?, num(c)?, num(h)?)?
            }
            _ => return Err(bad(no, "expected `layout <d> <c> <h>`")),
        };

        let (no, line) = lines
            .next()
            .ok_or_else(|| Error::Parse("missing global_phase line".into()))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        let global = match fields.as_slice() {
            ["global_phase", "none"] => None,
            ["global_phase", values @ ..] if !values.is_empty() => Some(
                values
                    .iter()
                    .map(|v| v.parse::<f64>().map_err(|_| bad(no, "bad global phase value")))
                    .collect::<Result<Vec<_>>>()?,
            ),
            _ => return Err(bad(no, "expected `global_phase <value|none>`")),
        };

        let mut alphas: Vec<Vec<Option<f64>>> =
            layout.qubits().iter().map(|&n| vec![None; n as usize]).collect();
        for (no, line) in lines {
            match line.split_whitespace().collect::<Vec<_>>().as_slice() {
                ["alpha", j, k, v] => {
                    let j: usize = j.parse().map_err(|_| bad(no, "bad subsystem index"))?;
                    let k: usize = k.parse().map_err(|_| bad(no, "bad qubit index"))?;
                    let v: f64 = v.parse().map_err(|_| bad(no, "bad coefficient"))?;
                    let slot = alphas
                        .get_mut(j)
                        .and_then(|b| b.get_mut(k))
                        .ok_or_else(|| bad(no, "coefficient index outside the layout"))?;
                    if slot.replace(v).is_some() {
                        return Err(bad(no, "duplicate coefficient"));
                    }
                }
                _ => return Err(bad(no, "expected `alpha <j> <k> <value>`")),
            }
        }
        let alphas = alphas
            .into_iter()
            .enumerate()
            .map(|(j, block)| {
                block
                    .into_iter()
                    .enumerate()
                    .map(|(k, v)| v.ok_or_else(|| Error::Parse(format!("missing alpha {j} {k}"))))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(DiagonalHamiltonian::new(layout, alphas)?, global)
    }
}
