use super::{blend, Compartment, Composition, FluidicsError, BUFFER, N_MIX, SAMPLE};

/// Control lines; line k loops rung k with rung k+1.
pub const LADDER_LINES: usize = 4;

/// Rungs hold sample/buffer mixtures. After a pair finishes mixing, the
/// upstream rung is refilled to its pre-mix concentration (from the sample
/// reservoir for rung 0) so the whole series is kept.
#[derive(Debug, Clone, PartialEq)]
pub struct LadderTopology {
    pub rungs: Vec<Compartment>,
    pub n_mix: usize,
    active: Option<usize>,
    cycles: usize,
    /// Pair compositions when the active line switched on.
    start: [Composition; 2],
    /// Solute volume added by refills so far.
    pub refilled: f64,
    pub completed: Vec<usize>,
}

impl Default for LadderTopology {
    fn default() -> Self {
        LadderTopology::new(&[1.0; LADDER_LINES + 1], N_MIX)
    }
}

impl LadderTopology {
    /// Rung 0 starts as pure sample, the rest as buffer.
    pub fn new(volumes: &[f64], n_mix: usize) -> Self {
        let rungs = volumes
            .iter()
            .enumerate()
            .map(|(k, &v)| Compartment::new(&format!("rung{k}"), v, super::pure(if k == 0 { SAMPLE } else { BUFFER })))
            .collect();
        LadderTopology {
            rungs,
            n_mix: n_mix.max(1),
            active: None,
            cycles: 0,
            start: Default::default(),
            refilled: 0.0,
            completed: Vec::new(),
        }
    }

    pub fn lines(&self) -> usize {
        self.rungs.len() - 1
    }

    pub fn concentrations(&self) -> Vec<f64> {
        self.rungs.iter().map(|r| r.fraction(SAMPLE)).collect()
    }

    /// Total sample volume held in the rungs.
    pub fn solute(&self) -> f64 {
        self.rungs.iter().map(|r| r.fraction(SAMPLE) * r.volume).sum()
    }

    /// Index of the single active line, validating one-hot.
    pub fn one_hot(lines: &[bool]) -> Result<usize, FluidicsError> {
        let on: Vec<usize> = (0..lines.len()).filter(|&k| lines[k]).collect();
        match on.as_slice() {
            [k] => Ok(*k),
            _ => Err(FluidicsError::OneHot(on.len())),
        }
    }

    /// One pump cycle on `line`. Mixing relaxes the pair linearly so it is
    /// uniform after `n_mix` cycles; further cycles change nothing.
    pub fn pump_cycle(&mut self, line: usize) -> Result<(), FluidicsError> {
        if line >= self.lines() {
            return Err(FluidicsError::LineRange {
                line,
                lines: self.lines(),
            });
        }
        if self.active != Some(line) {
            self.active = Some(line);
            self.cycles = 0;
            self.start = [self.rungs[line].composition.clone(), self.rungs[line + 1].composition.clone()];
        }
        if self.cycles >= self.n_mix {
            return Ok(());
        }
        self.cycles += 1;
        let (va, vb) = (self.rungs[line].volume, self.rungs[line + 1].volume);
        let mean = blend([(&self.start[0], va), (&self.start[1], vb)]);
        let w = self.cycles as f64 / self.n_mix as f64;
        for (i, s) in self.start.iter().enumerate() {
            self.rungs[line + i].composition = blend([(s, 1.0 - w), (&mean, w)]);
        }
        if self.cycles == self.n_mix {
            let before = self.rungs[line].fraction(SAMPLE);
            self.rungs[line].composition = self.start[0].clone();
            self.refilled += (self.rungs[line].fraction(SAMPLE) - before) * va;
            self.completed.push(line);
        }
        Ok(())
    }

    /// Runs `cycles` pump cycles with the given control-line levels.
    pub fn dilute_step(&mut self, lines: &[bool], cycles: usize) -> Result<(), FluidicsError> {
        let line = Self::one_hot(lines)?;
        for _ in 0..cycles {
            self.pump_cycle(line)?;
        }
        Ok(())
    }
}

/// Reference series: pairwise averaging with the upstream rung restored.
pub fn dilution_oracle(initial: &[f64], lines: &[usize]) -> Vec<f64> {
    let mut c = initial.to_vec();
    for &k in lines {
        let keep = c[k];
        let avg = 0.5 * (c[k] + c[k + 1]);
        c[k + 1] = avg;
        c[k] = keep;
    }
    c
}
