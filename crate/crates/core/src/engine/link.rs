//! Directed link channels. Every declared link becomes two channels, one per
//! direction, each with its own serializer and propagation delay. A channel
//! models an output queue implicitly: cells are serialized back to back, so a
//! cell handed over while the line is busy waits exactly as long as a FIFO
//! queue would hold it.

use std::collections::VecDeque;

use crate::units::PortId;

pub struct Channel {
    /// Index of the node feeding this channel.
    pub from_node: usize,
    /// Identity used in traces and for the owning switch port, if any.
    pub port: PortId,
    pub bandwidth_bps: f64,
    pub propagation_delay_us: f64,
    /// Time the serializer becomes free again.
    busy_until_us: f64,
    /// Serialization-end times of cells still queued or on the wire's
    /// serializer; used for queue-length sampling.
    pending_ends: VecDeque<f64>,
    pub serialized_cells: u64,
    pub serialized_bits: f64,
    /// Snapshot taken by the utilization sampler.
    pub last_sample_bits: f64,
    pub max_queue_cells: usize,
}

impl Channel {
    pub fn new(
        from_node: usize,
        port: PortId,
        bandwidth_bps: f64,
        propagation_delay_us: f64,
    ) -> Channel {
        Channel {
            from_node,
            port,
            bandwidth_bps,
            propagation_delay_us,
            busy_until_us: 0.0,
            pending_ends: VecDeque::new(),
            serialized_cells: 0,
            serialized_bits: 0.0,
            last_sample_bits: 0.0,
            max_queue_cells: 0,
        }
    }

    /// Hands a cell of `size_bits` to the channel at `now_us`; returns the
    /// time it is fully delivered at the far end (queueing + serialization +
    /// propagation).
    pub fn transmit(&mut self, now_us: f64, size_bits: f64) -> f64 {
        self.drain(now_us);
        let start = now_us.max(self.busy_until_us);
        let serialization_us = size_bits / self.bandwidth_bps * 1e6;
        let end = start + serialization_us;
        self.busy_until_us = end;
        self.pending_ends.push_back(end);
        if self.pending_ends.len() > self.max_queue_cells {
            self.max_queue_cells = self.pending_ends.len();
        }
        self.serialized_cells += 1;
        self.serialized_bits += size_bits;
        end + self.propagation_delay_us
    }

    /// Cells handed over but not yet fully serialized at `now_us`.
    pub fn queue_len(&mut self, now_us: f64) -> usize {
        self.drain(now_us);
        self.pending_ends.len()
    }

    fn drain(&mut self, now_us: f64) {
        while let Some(&end) = self.pending_ends.front() {
            if end <= now_us {
                self.pending_ends.pop_front();
            } else {
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{LinkDir, LinkId};

    fn test_channel() -> Channel {
        // 424-bit cells on a 424 Mb/s line: 1 us serialization, 10 us flight.
        let port = PortId {
            link: LinkId(1),
            dir: LinkDir::Fwd,
        };
        Channel::new(0, port, 424e6, 10.0)
    }

    #[test]
    fn idle_channel_delivers_after_serialization_and_flight() {
        let mut ch = test_channel();
        let arrival = ch.transmit(100.0, 424.0);
        assert!((arrival - 111.0).abs() < 1e-9);
        assert_eq!(ch.serialized_cells, 1);
    }

    #[test]
    fn back_to_back_cells_queue_behind_the_serializer() {
        let mut ch = test_channel();
        let first = ch.transmit(0.0, 424.0);
        let second = ch.transmit(0.0, 424.0);
        let third = ch.transmit(0.0, 424.0);
        assert!((first - 11.0).abs() < 1e-9);
        assert!((second - 12.0).abs() < 1e-9);
        assert!((third - 13.0).abs() < 1e-9);
        assert_eq!(ch.queue_len(0.0), 3);
        assert_eq!(ch.queue_len(2.5), 1);
        assert_eq!(ch.queue_len(3.0), 0);
        assert_eq!(ch.max_queue_cells, 3);
    }

    #[test]
    fn serializer_frees_up_between_spaced_cells() {
        let mut ch = test_channel();
        ch.transmit(0.0, 424.0);
        let later = ch.transmit(5.0, 424.0);
        assert!((later - 16.0).abs() < 1e-9);
        assert_eq!(ch.queue_len(5.0), 1);
    }
}
