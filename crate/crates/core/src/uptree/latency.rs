use crate::error::{Error, Result};

/// Time from submission to conscious content (`h` ticks) and to conscious
/// awareness (`h + 1` ticks, the broadcast being received).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyReport {
    pub height: u32,
    pub ticks_to_stm: u64,
    pub ticks_to_awareness: u64,
    pub seconds_to_stm: f64,
    pub seconds_to_awareness: f64,
}

/// `h = ceil(log_arity N)`, so a single processor has `h = 0`.
pub fn latency(tick_ms: f64, n_processors: u64, arity: u64) -> Result<LatencyReport> {
    if !(tick_ms.is_finite() && tick_ms > 0.0) {
        return Err(Error::Config(format!("tick length must be positive, got {tick_ms}")));
    }
    if n_processors == 0 {
        return Err(Error::NoProcessors);
    }
    if arity < 2 {
        return Err(Error::ArityTooSmall(arity as usize));
    }
    let mut height = 0u32;
    let mut reach: u128 = 1;
    while reach < u128::from(n_processors) {
        reach *= u128::from(arity);
        height += 1;
    }
    let ticks_to_stm = u64::from(height);
    let ticks_to_awareness = ticks_to_stm + 1;
    Ok(LatencyReport {
        height,
        ticks_to_stm,
        ticks_to_awareness,
        seconds_to_stm: ticks_to_stm as f64 * tick_ms / 1000.0,
        seconds_to_awareness: ticks_to_awareness as f64 * tick_ms / 1000.0,
    })
}
