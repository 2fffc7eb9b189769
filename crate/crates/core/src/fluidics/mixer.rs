use super::{blend, pure, Compartment, Composition, FluidicsError, N_MIX, PUMP_Q, R1, R2};

/// What the gating does in each FSM state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixerMode {
    /// 10: whole ring flushed from R1.
    FillAllR1,
    /// 11: left half flushed from R2.
    FillLeftR2,
    /// 01: whole ring flushed from R2.
    FillAllR2,
    /// 00: sealed ring, circulating.
    Circulate,
}

impl MixerMode {
    pub fn from_state(state: u8) -> Result<Self, FluidicsError> {
        Ok(match state {
            0b10 => MixerMode::FillAllR1,
            0b11 => MixerMode::FillLeftR2,
            0b01 => MixerMode::FillAllR2,
            0b00 => MixerMode::Circulate,
            s => return Err(FluidicsError::InvalidState(s)),
        })
    }
}

/// Ring split into equal plug-flow segments, left half first. Fill flow
/// enters at segment 0 and leaves at the end of the filled span.
#[derive(Debug, Clone, PartialEq)]
pub struct MixerTopology {
    pub ring_volume: f64,
    pub q: f64,
    pub n_mix: usize,
    pub segments: Vec<Composition>,
    /// Cycles spent circulating since the ring was last sealed.
    mixing: usize,
    /// Segment compositions when circulation started.
    sealed: Vec<Composition>,
}

impl Default for MixerTopology {
    fn default() -> Self {
        MixerTopology::new(1.0, PUMP_Q, N_MIX, pure("air"))
    }
}

impl MixerTopology {
    pub fn new(ring_volume: f64, q: f64, n_mix: usize, initial: Composition) -> Self {
        let n = ((ring_volume / q).round() as usize).max(2);
        let n = n + n % 2;
        MixerTopology {
            ring_volume,
            q,
            n_mix: n_mix.max(1),
            segments: vec![initial; n],
            mixing: 0,
            sealed: Vec::new(),
        }
    }

    fn segment_volume(&self) -> f64 {
        self.ring_volume / self.segments.len() as f64
    }

    fn half(&self, left: bool) -> &[Composition] {
        let h = self.segments.len() / 2;
        if left {
            &self.segments[..h]
        } else {
            &self.segments[h..]
        }
    }

    pub fn halves(&self) -> [Compartment; 2] {
        let v = self.segment_volume();
        [("left", true), ("right", false)].map(|(id, left)| {
            let comp = blend(self.half(left).iter().map(|c| (c, v)));
            Compartment::new(id, self.ring_volume / 2.0, comp)
        })
    }

    pub fn ring(&self) -> Composition {
        let v = self.segment_volume();
        blend(self.segments.iter().map(|c| (c, v)))
    }

    pub fn fraction(&self, source: &str) -> f64 {
        self.ring().get(source).copied().unwrap_or(0.0)
    }

    fn push(&mut self, span: usize, source: &str) {
        self.segments[..span].rotate_right(1);
        self.segments[0] = pure(source);
    }

    /// One pump cycle in the given state.
    pub fn pump_cycle(&mut self, mode: MixerMode) {
        if mode != MixerMode::Circulate {
            self.mixing = 0;
        }
        let n = self.segments.len();
        match mode {
            MixerMode::FillAllR1 => self.push(n, R1),
            MixerMode::FillLeftR2 => self.push(n / 2, R2),
            MixerMode::FillAllR2 => self.push(n, R2),
            MixerMode::Circulate => {
                if self.mixing == 0 {
                    self.sealed = self.segments.clone();
                }
                if self.mixing < self.n_mix {
                    self.mixing += 1;
                    // Linear relaxation from the sealed profile to the mean.
                    let mean = self.ring();
                    let w = self.mixing as f64 / self.n_mix as f64;
                    for (seg, start) in self.segments.iter_mut().zip(&self.sealed) {
                        *seg = blend([(start, 1.0 - w), (&mean, w)]);
                    }
                }
            }
        }
    }

    pub fn mixer_step(&mut self, state: u8, cycles: usize) -> Result<(), FluidicsError> {
        let mode = MixerMode::from_state(state)?;
        for _ in 0..cycles {
            self.pump_cycle(mode);
        }
        Ok(())
    }
}
