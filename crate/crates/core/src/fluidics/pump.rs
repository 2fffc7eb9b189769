/// Counts peristaltic cycles from three phase signals. A cycle is one rising
/// edge on each phase in the order 0, 1, 2; an out-of-order edge restarts
/// the sequence.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PumpTracker {
    last: [Option<bool>; 3],
    expect: usize,
    pub cycles: usize,
}

impl PumpTracker {
    pub fn new() -> Self {
        Self::default()
    }

    /// Feeds one sample of the three phases (None = UNKNOWN, ignored).
    /// Returns true when this sample completes a cycle.
    pub fn sample(&mut self, phases: [Option<bool>; 3]) -> bool {
        let mut done = false;
        for (i, now) in phases.iter().enumerate() {
            let Some(now) = *now else { continue };
            let rose = self.last[i] == Some(false) && now;
            self.last[i] = Some(now);
            if rose {
                done |= self.rising(i);
            }
        }
        done
    }

    fn rising(&mut self, phase: usize) -> bool {
        if phase == self.expect {
            self.expect += 1;
            if self.expect == 3 {
                self.expect = 0;
                self.cycles += 1;
                return true;
            }
        } else {
            self.expect = usize::from(phase == 0);
        }
        false
    }

    pub fn displaced(&self, q: f64) -> f64 {
        self.cycles as f64 * q
    }
}
