//! Event timing in a discrete-event simulation: an event calendar whose
//! delays are generalized Cox variates, and a single-server FIFO queue with
//! Poisson arrivals checked against the Pollaczek-Khinchine mean wait.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, VecDeque};

use crate::analysis::{self, MomentSummary};
use crate::error::{Error, Result};
use crate::model::GeneralizedCoxModel;
use crate::sampling::{self, SamplerState};

#[derive(Debug)]
struct Pending<E> {
    time: f64,
    seq: u64,
    event: E,
}

impl<E> PartialEq for Pending<E> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<E> Eq for Pending<E> {}

impl<E> PartialOrd for Pending<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Pending<E> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.seq.cmp(&other.seq))
    }
}

/// Future event list ordered by time, FIFO among equal times.
#[derive(Debug)]
pub struct EventCalendar<E> {
    clock: f64,
    seq: u64,
    pending: BinaryHeap<Reverse<Pending<E>>>,
    rng: SamplerState,
}

impl<E> EventCalendar<E> {
    pub fn new(rng: SamplerState) -> Self {
        Self {
            clock: 0.0,
            seq: 0,
            pending: BinaryHeap::new(),
            rng,
        }
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    /// Schedules `event` after a delay drawn from `model`; returns the
    /// absolute firing time.
    pub fn schedule(&mut self, model: &GeneralizedCoxModel, event: E) -> f64 {
        let delay = sampling::sample(model, &mut self.rng);
        self.schedule_after(delay, event)
    }

    /// Schedules `event` after a fixed nonnegative delay.
    pub fn schedule_after(&mut self, delay: f64, event: E) -> f64 {
        debug_assert!(delay >= 0.0);
        let time = self.clock + delay;
        self.pending.push(Reverse(Pending {
            time,
            seq: self.seq,
            event,
        }));
        self.seq += 1;
        time
    }

    /// Removes the earliest event and advances the clock to it.
    pub fn pop(&mut self) -> Option<(f64, E)> {
        let Reverse(next) = self.pending.pop()?;
        self.clock = next.time;
        Some((next.time, next.event))
    }
}

/// Long-run metrics of one M/PH/1 run, measured after the warm-up.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueStats {
    /// Customers whose waits were measured (after warm-up).
    pub n_served: usize,
    pub mean_wait: f64,
    pub mean_system_time: f64,
    /// Busy fraction of the whole run.
    pub utilization: f64,
    /// Batch-means standard error of `mean_wait`.
    pub se_wait: f64,
    /// Offered load `λ_a E[S]`.
    pub rho: f64,
    /// Set when `rho >= 1`; the statistics are then transient, not steady.
    pub unstable: bool,
    pub arrivals: usize,
    pub departures: usize,
    /// Customers still queued or in service when the run stopped.
    pub in_system: usize,
    /// Simulated time at the last event.
    pub end_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mph1Config {
    pub arrival_rate: f64,
    /// Total departures simulated, warm-up included.
    pub customers: usize,
    /// Fraction of the earliest departures discarded.
    pub warmup_fraction: f64,
    /// Batches used for the batch-means standard error.
    pub batches: usize,
    pub seed: u64,
    pub record_waits: bool,
}

impl Default for Mph1Config {
    fn default() -> Self {
        Self {
            arrival_rate: 1.0,
            customers: 500_000,
            warmup_fraction: 0.1,
            batches: 20,
            seed: 0,
            record_waits: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mph1Outcome {
    pub stats: QueueStats,
    /// Per-customer queueing delays after warm-up, when requested.
    pub waits: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum QueueEvent {
    Arrival,
    Departure,
}

/// Simulates a FIFO single-server queue with Poisson arrivals and service
/// times drawn from `service`. Service draws use the calendar's stream;
/// arrivals use a split stream of the same seed.
pub fn simulate_mph1(config: &Mph1Config, service: &GeneralizedCoxModel) -> Result<Mph1Outcome> {
    let lambda = config.arrival_rate;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::DomainError(format!(
            "arrival rate {lambda} must be >= 0"
        )));
    }
    if !(0.0..1.0).contains(&config.warmup_fraction) {
        return Err(Error::DomainError(
            "warm-up fraction must lie in [0, 1)".into(),
        ));
    }
    if config.batches < 2 {
        return Err(Error::DomainError("need at least 2 batches".into()));
    }
    let rho = lambda * analysis::mean(service);
    let empty = QueueStats {
        n_served: 0,
        mean_wait: 0.0,
        mean_system_time: 0.0,
        utilization: 0.0,
        se_wait: 0.0,
        rho,
        unstable: false,
        arrivals: 0,
        departures: 0,
        in_system: 0,
        end_time: 0.0,
    };
    if lambda == 0.0 || config.customers == 0 {
        return Ok(Mph1Outcome {
            stats: empty,
            waits: config.record_waits.then(Vec::new),
        });
    }

    let mut service_rng = SamplerState::new(config.seed);
    let mut arrival_rng = service_rng.split();
    let mut cal = EventCalendar::new(service_rng);

    let warmup = (config.customers as f64 * config.warmup_fraction).floor() as usize;
    let mut waits = Vec::with_capacity(config.customers - warmup);
    let mut system_times = 0.0;
    // arrival times of customers queued behind the one in service
    let mut queue: VecDeque<f64> = VecDeque::new();
    let mut in_service: Option<(f64, f64)> = None; // (arrival, service start)
    let mut busy_since = 0.0;
    let mut busy_time = 0.0;
    let (mut arrivals, mut departures) = (0usize, 0usize);

    let first = sampling::exponential_from_uniform(arrival_rng.uniform(), lambda);
    cal.schedule_after(first, QueueEvent::Arrival);

    while departures < config.customers {
        let Some((now, event)) = cal.pop() else {
            break;
        };
        match event {
            QueueEvent::Arrival => {
                arrivals += 1;
                let gap = sampling::exponential_from_uniform(arrival_rng.uniform(), lambda);
                cal.schedule_after(gap, QueueEvent::Arrival);
                if in_service.is_none() {
                    in_service = Some((now, now));
                    busy_since = now;
                    cal.schedule(service, QueueEvent::Departure);
                } else {
                    queue.push_back(now);
                }
            }
            QueueEvent::Departure => {
                let (arrived, started) = in_service.take().expect("departure while idle");
                if departures >= warmup {
                    waits.push(started - arrived);
                    system_times += now - arrived;
                }
                departures += 1;
                if let Some(next) = queue.pop_front() {
                    in_service = Some((next, now));
                    cal.schedule(service, QueueEvent::Departure);
                } else {
                    busy_time += now - busy_since;
                }
            }
        }
    }
    let end_time = cal.clock();
    if in_service.is_some() {
        busy_time += end_time - busy_since;
    }

    let n = waits.len();
    let mean_wait = waits.iter().sum::<f64>() / n as f64;
    let stats = QueueStats {
        n_served: n,
        mean_wait,
        mean_system_time: system_times / n as f64,
        utilization: if end_time > 0.0 {
            busy_time / end_time
        } else {
            0.0
        },
        se_wait: batch_means_se(&waits, config.batches),
        rho,
        unstable: rho >= 1.0,
        arrivals,
        departures,
        in_system: queue.len() + usize::from(in_service.is_some()),
        end_time,
    };
    Ok(Mph1Outcome {
        stats,
        waits: config.record_waits.then_some(waits),
    })
}

/// Convenience wrapper with the default warm-up and batching.
pub fn run_mph1(
    arrival_rate: f64,
    service: &GeneralizedCoxModel,
    customers: usize,
    seed: u64,
) -> Result<QueueStats> {
    let config = Mph1Config {
        arrival_rate,
        customers,
        seed,
        ..Mph1Config::default()
    };
    Ok(simulate_mph1(&config, service)?.stats)
}

/// Standard error of the mean from `batches` contiguous equal batches.
pub fn batch_means_se(values: &[f64], batches: usize) -> f64 {
    let size = values.len() / batches;
    if size == 0 {
        return f64::NAN;
    }
    let means: Vec<f64> = values
        .chunks_exact(size)
        .take(batches)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    let b = means.len() as f64;
    let grand = means.iter().sum::<f64>() / b;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (b - 1.0);
    (var / b).sqrt()
}

/// Pollaczek-Khinchine mean wait in queue, `λ E[S²] / (2(1 - ρ))`.
pub fn pk_mean_wait(arrival_rate: f64, service: &MomentSummary) -> Result<f64> {
    if !(arrival_rate >= 0.0 && arrival_rate.is_finite()) {
        return Err(Error::DomainError(format!(
            "arrival rate {arrival_rate} must be >= 0"
        )));
    }
    if !(service.mean > 0.0 && service.second_moment > 0.0) {
        return Err(Error::DomainError(
            "service time must have positive mean and second moment".into(),
        ));
    }
    let rho = arrival_rate * service.mean;
    if rho >= 1.0 {
        return Err(Error::UnstableSystem { rho });
    }
    Ok(arrival_rate * service.second_moment / (2.0 * (1.0 - rho)))
}
