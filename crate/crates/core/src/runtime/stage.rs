//! Stages connected by bounded FIFO channels of [`WirePacket`]s.
//!
//! A stage consumes packets in order, keeps private state, and emits outputs
//! in order. A producer signals end-of-stream by writing exactly one sentinel
//! after its last packet; a consumer stops at the first sentinel it reads.

use std::time::{Duration, Instant};

use crossbeam::channel::{Receiver, Sender, TryRecvError, TrySendError};

use crate::aer::{pack_event, unpack_event, PolarityEvent, Unpacked, WirePacket, WirePayload};
use crate::pipeline::{AggregatedEvent, Aggregator, DisparityEngine, DisparityEvent, MatchConfig};

use super::{RuntimeError, StageStats};

pub trait Stage {
    type Output;

    fn name(&self) -> &'static str;

    fn process(&mut self, input: WirePayload, out: &mut Vec<Self::Output>) -> Result<(), RuntimeError>;

    /// Called once after the last input.
    fn finish(&mut self, out: &mut Vec<Self::Output>) -> Result<(), RuntimeError>;
}

/// Passes every packet through unchanged.
#[derive(Debug, Default)]
pub struct IdentityStage;

impl Stage for IdentityStage {
    type Output = WirePacket;

    fn name(&self) -> &'static str {
        "identity"
    }

    fn process(&mut self, input: WirePayload, out: &mut Vec<WirePacket>) -> Result<(), RuntimeError> {
        out.push(pack_event(&input)?);
        Ok(())
    }

    fn finish(&mut self, _out: &mut Vec<WirePacket>) -> Result<(), RuntimeError> {
        Ok(())
    }
}

/// Raw polarity packets in, aggregated packets (payload = polarity sum) out.
#[derive(Debug)]
pub struct AggregatorStage {
    aggregator: Aggregator,
    scratch: Vec<AggregatedEvent>,
}

impl AggregatorStage {
    pub fn new(deadline_us: u64) -> Self {
        AggregatorStage { aggregator: Aggregator::new(deadline_us), scratch: Vec::new() }
    }

    fn emit(&mut self, out: &mut Vec<WirePacket>) -> Result<(), RuntimeError> {
        for a in self.scratch.drain(..) {
            out.push(pack_event(&WirePayload {
                t_us: a.t_us as u32,
                x: a.x,
                y: a.y,
                side: a.side,
                value: a.polarity_sum,
            })?);
        }
        Ok(())
    }
}

impl Stage for AggregatorStage {
    type Output = WirePacket;

    fn name(&self) -> &'static str {
        "aggregator"
    }

    #[inline]
    fn process(&mut self, p: WirePayload, out: &mut Vec<WirePacket>) -> Result<(), RuntimeError> {
        let e = PolarityEvent {
            t_us: u64::from(p.t_us),
            x: p.x,
            y: p.y,
            polarity: p.value as i8,
            side: p.side,
        };
        self.aggregator.push_into(&e, &mut self.scratch)?;
        self.emit(out)
    }

    fn finish(&mut self, out: &mut Vec<WirePacket>) -> Result<(), RuntimeError> {
        self.aggregator.flush_all_into(&mut self.scratch);
        self.emit(out)
    }
}

/// Aggregated packets in, disparity events out. Holds both side's level frames.
#[derive(Debug)]
pub struct ProducerStage {
    engine: DisparityEngine,
}

impl ProducerStage {
    pub fn new(width: u16, height: u16, cfg: MatchConfig) -> Self {
        ProducerStage { engine: DisparityEngine::new(width, height, cfg) }
    }
}

impl Stage for ProducerStage {
    type Output = DisparityEvent;

    fn name(&self) -> &'static str {
        "producer"
    }

    #[inline]
    fn process(&mut self, p: WirePayload, out: &mut Vec<DisparityEvent>) -> Result<(), RuntimeError> {
        let a = AggregatedEvent {
            t_us: u64::from(p.t_us),
            x: p.x,
            y: p.y,
            polarity_sum: p.value,
            side: p.side,
        };
        out.extend(self.engine.on_aggregate(&a)?);
        Ok(())
    }

    fn finish(&mut self, _out: &mut Vec<DisparityEvent>) -> Result<(), RuntimeError> {
        Ok(())
    }
}

pub fn is_sentinel(p: &WirePacket) -> bool {
    p.is_sentinel()
}

/// Writes the end-of-stream marker.
pub fn emit_sentinel(tx: &Sender<WirePacket>) -> Result<(), RuntimeError> {
    tx.send(WirePacket::sentinel()).map_err(|_| RuntimeError::ChannelClosed("sentinel send"))
}

/// Blocking send that only reads the clock when the channel is full.
fn send_timed(tx: &Sender<WirePacket>, p: WirePacket, blocked: &mut Duration, stage: &'static str) -> Result<(), RuntimeError> {
    match tx.try_send(p) {
        Ok(()) => Ok(()),
        Err(TrySendError::Full(p)) => {
            let t0 = Instant::now();
            let r = tx.send(p).map_err(|_| RuntimeError::ChannelClosed(stage));
            *blocked += t0.elapsed();
            r
        }
        Err(TrySendError::Disconnected(_)) => Err(RuntimeError::ChannelClosed(stage)),
    }
}

fn recv_timed(rx: &Receiver<WirePacket>, blocked: &mut Duration, stage: &'static str) -> Result<WirePacket, RuntimeError> {
    match rx.try_recv() {
        Ok(p) => Ok(p),
        Err(TryRecvError::Empty) => {
            let t0 = Instant::now();
            let r = rx.recv().map_err(|_| RuntimeError::ChannelClosed(stage));
            *blocked += t0.elapsed();
            r
        }
        Err(TryRecvError::Disconnected) => Err(RuntimeError::ChannelClosed(stage)),
    }
}

/// Head stage: reads a host array (stopping early at a sentinel, if any),
/// forwards outputs to `tx`, then writes one sentinel.
pub fn run_source_stage<S>(mut stage: S, input: &[WirePacket], tx: &Sender<WirePacket>) -> Result<StageStats, RuntimeError>
where
    S: Stage<Output = WirePacket>,
{
    let name = stage.name();
    let start = Instant::now();
    let mut blocked = Duration::ZERO;
    let mut stats = StageStats::named(name);
    let mut out = Vec::new();
    for p in input {
        let payload = match unpack_event(p) {
            Unpacked::Sentinel => break,
            Unpacked::Event(e) => e,
        };
        stats.events_in += 1;
        stage.process(payload, &mut out)?;
        stats.events_out += out.len() as u64;
        for q in out.drain(..) {
            send_timed(tx, q, &mut blocked, name)?;
        }
    }
    stage.finish(&mut out)?;
    stats.events_out += out.len() as u64;
    for q in out.drain(..) {
        send_timed(tx, q, &mut blocked, name)?;
    }
    emit_sentinel(tx)?;
    stats.wall_time = start.elapsed();
    stats.busy_time = stats.wall_time.saturating_sub(blocked);
    Ok(stats)
}

/// Channel-fed stage: reads until the first sentinel and hands each output to `sink`.
///
/// Returns [`RuntimeError::ChannelClosed`] if the producer disappears without
/// writing a sentinel.
pub fn run_channel_stage<S, F>(mut stage: S, rx: &Receiver<WirePacket>, mut sink: F) -> Result<StageStats, RuntimeError>
where
    S: Stage,
    F: FnMut(S::Output) -> Result<(), RuntimeError>,
{
    let name = stage.name();
    let start = Instant::now();
    let mut blocked = Duration::ZERO;
    let mut stats = StageStats::named(name);
    let mut out = Vec::new();
    loop {
        let p = recv_timed(rx, &mut blocked, name)?;
        let payload = match unpack_event(&p) {
            Unpacked::Sentinel => break,
            Unpacked::Event(e) => e,
        };
        stats.events_in += 1;
        stage.process(payload, &mut out)?;
        stats.events_out += out.len() as u64;
        for o in out.drain(..) {
            sink(o)?;
        }
    }
    stage.finish(&mut out)?;
    stats.events_out += out.len() as u64;
    for o in out.drain(..) {
        sink(o)?;
    }
    stats.wall_time = start.elapsed();
    stats.busy_time = stats.wall_time.saturating_sub(blocked);
    Ok(stats)
}

/// Middle stage: channel in, channel out, one sentinel forwarded.
pub fn run_relay_stage<S>(stage: S, rx: &Receiver<WirePacket>, tx: &Sender<WirePacket>) -> Result<StageStats, RuntimeError>
where
    S: Stage<Output = WirePacket>,
{
    let name = stage.name();
    let mut blocked = Duration::ZERO;
    let mut stats = run_channel_stage(stage, rx, |p| send_timed(tx, p, &mut blocked, name))?;
    emit_sentinel(tx)?;
    stats.busy_time = stats.busy_time.saturating_sub(blocked);
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aer::Side;
    use crossbeam::channel::bounded;
    use std::thread;

    fn packets(n: u32) -> Vec<WirePacket> {
        (0..n)
            .map(|i| {
                let side = if i % 3 == 0 { Side::Right } else { Side::Left };
                pack_event(&WirePayload { t_us: i, x: (i % 50) as u16, y: (i % 7) as u16, side, value: 1 }).unwrap()
            })
            .collect()
    }

    #[test]
    fn sentinel_detection() {
        assert!(is_sentinel(&WirePacket([u32::MAX; 3])));
        assert!(packets(100).iter().all(|p| !is_sentinel(p)));
    }

    #[test]
    fn identity_source_preserves_sequence_and_ends_with_one_sentinel() {
        let input = packets(500);
        let (tx, rx) = bounded(4);
        let received = thread::scope(|s| {
            s.spawn(|| run_source_stage(IdentityStage, &input, &tx).unwrap());
            let mut got = Vec::new();
            loop {
                let p = rx.recv().unwrap();
                got.push(p);
                if p.is_sentinel() {
                    break;
                }
            }
            got
        });
        assert_eq!(received.len(), 501);
        assert_eq!(&received[..500], &input[..]);
        assert!(received[500].is_sentinel());
        drop(tx);
        assert!(rx.try_recv().is_err());
    }

    #[test]
    fn two_chained_identity_stages_are_identity() {
        let input = packets(300);
        let (tx1, rx1) = bounded(1);
        let (tx2, rx2) = bounded(2);
        let (s1, s2, got) = thread::scope(|s| {
            let h1 = s.spawn(|| run_source_stage(IdentityStage, &input, &tx1).unwrap());
            let h2 = s.spawn(|| run_relay_stage(IdentityStage, &rx1, &tx2).unwrap());
            let mut got = Vec::new();
            let sink_stats = run_channel_stage(IdentityStage, &rx2, |p| {
                got.push(p);
                Ok(())
            })
            .unwrap();
            (h1.join().unwrap(), h2.join().unwrap(), (got, sink_stats))
        });
        assert_eq!(got.0, input);
        assert_eq!(s1.events_out, s2.events_in);
        assert_eq!(s2.events_out, got.1.events_in);
        assert_eq!(got.1.events_in, 300);
        // Exactly one sentinel reached the sink; nothing follows it.
        assert!(rx2.try_recv().is_err());
    }

    #[test]
    fn consumer_processes_exactly_n_packets_before_sentinel() {
        let (tx, rx) = bounded(8);
        let input = packets(37);
        let stats = thread::scope(|s| {
            s.spawn(|| {
                for p in &input {
                    tx.send(*p).unwrap();
                }
                emit_sentinel(&tx).unwrap();
                // Anything after the sentinel must be ignored.
                tx.send(input[0]).unwrap();
            });
            run_channel_stage(IdentityStage, &rx, |_| Ok(())).unwrap()
        });
        assert_eq!(stats.events_in, 37);
    }

    #[test]
    fn missing_sentinel_is_reported() {
        let (tx, rx) = bounded::<WirePacket>(8);
        tx.send(packets(1)[0]).unwrap();
        drop(tx);
        let err = run_channel_stage(IdentityStage, &rx, |_| Ok(())).unwrap_err();
        assert!(matches!(err, RuntimeError::ChannelClosed(_)));
    }

    #[test]
    fn aggregator_stage_matches_direct_calls() {
        let raw = [(0u32, 5u16, 5u16), (10, 5, 5), (2000, 7, 7)];
        let input: Vec<WirePacket> = raw
            .iter()
            .map(|&(t, x, y)| pack_event(&WirePayload { t_us: t, x, y, side: Side::Left, value: 1 }).unwrap())
            .collect();

        let mut direct = Aggregator::new(1000);
        let mut expected = Vec::new();
        for &(t, x, y) in &raw {
            expected.extend(direct.push(&PolarityEvent::new(u64::from(t), x, y, 1, Side::Left)).unwrap());
        }
        expected.extend(direct.flush_all());

        let (tx, rx) = bounded(2);
        let got = thread::scope(|s| {
            s.spawn(|| run_source_stage(AggregatorStage::new(1000), &input, &tx).unwrap());
            let mut got = Vec::new();
            run_channel_stage(IdentityStage, &rx, |p| {
                got.push(p);
                Ok(())
            })
            .unwrap();
            got
        });
        let decoded: Vec<AggregatedEvent> = got
            .iter()
            .map(|p| match unpack_event(p) {
                Unpacked::Event(e) => AggregatedEvent {
                    t_us: u64::from(e.t_us),
                    x: e.x,
                    y: e.y,
                    polarity_sum: e.value,
                    side: e.side,
                },
                Unpacked::Sentinel => unreachable!(),
            })
            .collect();
        assert_eq!(decoded, expected);
        assert_eq!(decoded[0], AggregatedEvent { t_us: 10, x: 5, y: 5, polarity_sum: 2, side: Side::Left });
    }
}
