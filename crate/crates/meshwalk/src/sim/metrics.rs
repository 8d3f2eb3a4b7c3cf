//! Per-minute metric aggregation and the CSV reports.
//!
//! Samples land in minute buckets (minute m covers (60(m-1), 60m]) as the
//! run produces them; utilization comes from the channels' busy meters at
//! the end. The summary averages each metric's minute series twice: over
//! the whole run and over the minutes after the warm-up.

use std::io::{self, Write};

use crate::medium::BusyMeter;

/// Everything the reports track, in output order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    ResponseTime,
    LatencyTime,
    RequestsPerMinute,
    UplinkUtilization,
    DownlinkUtilization,
    CacheHitRatio,
    VirtualPerception,
    DroppedRequests,
}

pub const METRICS: [Metric; 8] = [
    Metric::ResponseTime,
    Metric::LatencyTime,
    Metric::RequestsPerMinute,
    Metric::UplinkUtilization,
    Metric::DownlinkUtilization,
    Metric::CacheHitRatio,
    Metric::VirtualPerception,
    Metric::DroppedRequests,
];

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::ResponseTime => "response_time",
            Metric::LatencyTime => "latency_time",
            Metric::RequestsPerMinute => "requests_per_minute",
            Metric::UplinkUtilization => "uplink_utilization",
            Metric::DownlinkUtilization => "downlink_utilization",
            Metric::CacheHitRatio => "cache_hit_ratio",
            Metric::VirtualPerception => "virtual_perception",
            Metric::DroppedRequests => "dropped_requests",
        }
    }

    fn index(self) -> usize {
        METRICS.iter().position(|&m| m == self).unwrap()
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Agg {
    sum: f64,
    count: u64,
}

/// Streaming collector the engine feeds during a run.
#[derive(Debug)]
pub struct MetricsCollector {
    minutes: usize,
    response: Vec<Agg>,
    latency: Vec<Agg>,
    requests: Vec<u64>,
    hit_bytes: Vec<u64>,
    miss_bytes: Vec<u64>,
    perception: Vec<Agg>,
    drops: Vec<u64>,
}

impl MetricsCollector {
    pub fn new(duration: f64) -> Self {
        let minutes = (duration / 60.0).ceil().max(1.0) as usize;
        Self {
            minutes,
            response: vec![Agg::default(); minutes],
            latency: vec![Agg::default(); minutes],
            requests: vec![0; minutes],
            hit_bytes: vec![0; minutes],
            miss_bytes: vec![0; minutes],
            perception: vec![Agg::default(); minutes],
            drops: vec![0; minutes],
        }
    }

    fn bucket(&self, t: f64) -> usize {
        ((t / 60.0).ceil() as usize).clamp(1, self.minutes) - 1
    }

    pub fn add_response(&mut self, t: f64, response: f64, latency: f64) {
        let b = self.bucket(t);
        self.response[b].sum += response;
        self.response[b].count += 1;
        self.latency[b].sum += latency;
        self.latency[b].count += 1;
    }

    pub fn add_request(&mut self, t: f64) {
        let b = self.bucket(t);
        self.requests[b] += 1;
    }

    pub fn add_lookup_bytes(&mut self, t: f64, hit: u64, miss: u64) {
        let b = self.bucket(t);
        self.hit_bytes[b] += hit;
        self.miss_bytes[b] += miss;
    }

    pub fn add_perception(&mut self, t: f64, value: f64) {
        let b = self.bucket(t);
        self.perception[b].sum += value;
        self.perception[b].count += 1;
    }

    pub fn add_drop(&mut self, t: f64) {
        let b = self.bucket(t);
        self.drops[b] += 1;
    }

    /// Fold in the channel busy meters and freeze the report.
    pub fn finish(
        self,
        uplink: &BusyMeter,
        downlink: &BusyMeter,
        duration: f64,
        warmup: f64,
    ) -> MetricsReport {
        let minutes = self.minutes;
        let mut series = vec![vec![None; minutes]; METRICS.len()];
        let minute_len = |m: usize| (duration - 60.0 * m as f64).clamp(0.0, 60.0);
        for m in 0..minutes {
            let agg_mean = |a: &Agg| (a.count > 0).then(|| a.sum / a.count as f64);
            series[Metric::ResponseTime.index()][m] = agg_mean(&self.response[m]);
            series[Metric::LatencyTime.index()][m] = agg_mean(&self.latency[m]);
            series[Metric::RequestsPerMinute.index()][m] = Some(self.requests[m] as f64);
            series[Metric::UplinkUtilization.index()][m] =
                Some(100.0 * uplink.minute(m + 1) / minute_len(m));
            series[Metric::DownlinkUtilization.index()][m] =
                Some(100.0 * downlink.minute(m + 1) / minute_len(m));
            let looked = self.hit_bytes[m] + self.miss_bytes[m];
            series[Metric::CacheHitRatio.index()][m] =
                (looked > 0).then(|| 100.0 * self.hit_bytes[m] as f64 / looked as f64);
            series[Metric::VirtualPerception.index()][m] = agg_mean(&self.perception[m]);
            series[Metric::DroppedRequests.index()][m] = Some(self.drops[m] as f64);
        }
        MetricsReport {
            minutes,
            warmup_minutes: (warmup / 60.0).ceil() as usize,
            series,
        }
    }
}

/// Frozen per-minute series for every metric.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    minutes: usize,
    warmup_minutes: usize,
    /// Indexed [metric][minute-1]; None where the minute had no samples.
    series: Vec<Vec<Option<f64>>>,
}

impl MetricsReport {
    pub fn minutes(&self) -> usize {
        self.minutes
    }

    pub fn warmup_minutes(&self) -> usize {
        self.warmup_minutes
    }

    pub fn minute_value(&self, metric: Metric, minute: usize) -> Option<f64> {
        assert!((1..=self.minutes).contains(&minute));
        self.series[metric.index()][minute - 1]
    }

    fn mean_over(&self, metric: Metric, from_minute: usize) -> Option<f64> {
        let values: Vec<f64> = (from_minute..=self.minutes)
            .filter_map(|m| self.minute_value(metric, m))
            .collect();
        (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
    }

    /// Mean of the minute series over the whole run.
    pub fn full_mean(&self, metric: Metric) -> Option<f64> {
        self.mean_over(metric, 1)
    }

    /// Mean of the minute series after the warm-up minutes.
    pub fn post_warmup_mean(&self, metric: Metric) -> Option<f64> {
        self.mean_over(metric, self.warmup_minutes + 1)
    }

    /// Minute numbers after the warm-up, for per-minute gates.
    pub fn post_warmup_minutes(&self) -> impl Iterator<Item = usize> {
        self.warmup_minutes + 1..=self.minutes
    }

    pub fn write_metrics_csv(&self, out: &mut dyn Write) -> io::Result<()> {
        writeln!(out, "minute,metric,value")?;
        for minute in 1..=self.minutes {
            for metric in METRICS {
                match self.minute_value(metric, minute) {
                    Some(v) => writeln!(out, "{minute},{},{v}", metric.name())?,
                    None => writeln!(out, "{minute},{},", metric.name())?,
                }
            }
        }
        Ok(())
    }

    pub fn write_summary_csv(&self, out: &mut dyn Write) -> io::Result<()> {
        writeln!(out, "metric,full_run_mean,post_warmup_mean")?;
        for metric in METRICS {
            let fmt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{}",
                metric.name(),
                fmt(self.full_mean(metric)),
                fmt(self.post_warmup_mean(metric))
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meter(intervals: &[(f64, f64)]) -> BusyMeter {
        let mut m = BusyMeter::default();
        for &(a, b) in intervals {
            m.add(a, b);
        }
        m
    }

    #[test]
    fn buckets_land_on_minute_boundaries() {
        let mut c = MetricsCollector::new(180.0);
        c.add_request(0.5); // minute 1
        c.add_request(60.0); // still minute 1 (inclusive upper edge)
        c.add_request(60.1); // minute 2
        c.add_request(180.0); // minute 3
        let r = c.finish(&BusyMeter::default(), &BusyMeter::default(), 180.0, 60.0);
        assert_eq!(r.minute_value(Metric::RequestsPerMinute, 1), Some(2.0));
        assert_eq!(r.minute_value(Metric::RequestsPerMinute, 2), Some(1.0));
        assert_eq!(r.minute_value(Metric::RequestsPerMinute, 3), Some(1.0));
    }

    #[test]
    fn means_split_at_warmup() {
        let mut c = MetricsCollector::new(240.0);
        c.add_response(30.0, 1.0, 0.5);
        c.add_response(150.0, 3.0, 1.5);
        c.add_response(210.0, 5.0, 2.5);
        let r = c.finish(&BusyMeter::default(), &BusyMeter::default(), 240.0, 120.0);
        assert_eq!(r.warmup_minutes(), 2);
        // Minutes with samples: 1 (1.0), 3 (3.0), 4 (5.0).
        assert_eq!(r.full_mean(Metric::ResponseTime), Some(3.0));
        assert_eq!(r.post_warmup_mean(Metric::ResponseTime), Some(4.0));
        assert_eq!(r.full_mean(Metric::LatencyTime), Some(1.5));
    }

    #[test]
    fn utilization_uses_busy_share_per_minute() {
        let c = MetricsCollector::new(120.0);
        let up = meter(&[(0.0, 30.0), (100.0, 110.0)]);
        let r = c.finish(&up, &BusyMeter::default(), 120.0, 60.0);
        assert_eq!(r.minute_value(Metric::UplinkUtilization, 1), Some(50.0));
        let m2 = r.minute_value(Metric::UplinkUtilization, 2).unwrap();
        assert!((m2 - 100.0 * 10.0 / 60.0).abs() < 1e-12);
        assert_eq!(r.minute_value(Metric::DownlinkUtilization, 2), Some(0.0));
    }

    #[test]
    fn hit_ratio_is_bytewise_and_empty_minutes_are_blank() {
        let mut c = MetricsCollector::new(120.0);
        c.add_lookup_bytes(10.0, 300, 100);
        let r = c.finish(&BusyMeter::default(), &BusyMeter::default(), 120.0, 0.0);
        assert_eq!(r.minute_value(Metric::CacheHitRatio, 1), Some(75.0));
        assert_eq!(r.minute_value(Metric::CacheHitRatio, 2), None);
        assert_eq!(r.full_mean(Metric::CacheHitRatio), Some(75.0));
    }

    #[test]
    fn csv_shapes_are_stable() {
        let mut c = MetricsCollector::new(60.0);
        c.add_perception(1.0, 0.5);
        let r = c.finish(&BusyMeter::default(), &BusyMeter::default(), 60.0, 0.0);
        let mut metrics = Vec::new();
        r.write_metrics_csv(&mut metrics).unwrap();
        let text = String::from_utf8(metrics).unwrap();
        assert_eq!(text.lines().count(), 1 + METRICS.len());
        assert!(text.contains("1,virtual_perception,0.5"));
        assert!(text.contains("1,response_time,\n"));
        let mut summary = Vec::new();
        r.write_summary_csv(&mut summary).unwrap();
        let text = String::from_utf8(summary).unwrap();
        assert!(text.starts_with("metric,full_run_mean,post_warmup_mean"));
        assert!(text.contains("virtual_perception,0.5,0.5"));
    }
}
