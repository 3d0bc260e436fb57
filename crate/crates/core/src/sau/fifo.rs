/// Fixed-length shift register holding `len` bits, with an occupancy count
/// so reads of never-written slots are caught.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShiftFifo {
    slots: Vec<bool>,
    head: usize,
    occupied: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FifoFault {
    Overflow,
    Underflow,
}

impl ShiftFifo {
    pub fn new(len: usize) -> Self {
        assert!(len > 0);
        Self {
            slots: vec![false; len],
            head: 0,
            occupied: 0,
        }
    }

    /// Physical length in bits; constant.
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupied == 0
    }

    pub fn occupied(&self) -> usize {
        self.occupied
    }

    pub fn push(&mut self, bit: bool) -> Result<(), FifoFault> {
        if self.occupied == self.slots.len() {
            return Err(FifoFault::Overflow);
        }
        let tail = (self.head + self.occupied) % self.slots.len();
        self.slots[tail] = bit;
        self.occupied += 1;
        Ok(())
    }

    pub fn pop(&mut self) -> Result<bool, FifoFault> {
        if self.occupied == 0 {
            return Err(FifoFault::Underflow);
        }
        let bit = self.slots[self.head];
        self.head = (self.head + 1) % self.slots.len();
        self.occupied -= 1;
        Ok(bit)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifo_order_and_faults() {
        let mut f = ShiftFifo::new(3);
        assert_eq!(f.pop(), Err(FifoFault::Underflow));
        for b in [true, false, true] {
            f.push(b).unwrap();
        }
        assert_eq!(f.push(true), Err(FifoFault::Overflow));
        assert_eq!(f.pop(), Ok(true));
        f.push(false).unwrap();
        assert_eq!(f.pop(), Ok(false));
        assert_eq!(f.pop(), Ok(true));
        assert_eq!(f.pop(), Ok(false));
        assert!(f.is_empty());
        assert_eq!(f.len(), 3);
    }
}
