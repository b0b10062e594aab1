//! Detection output: alarms on both clocks, trajectories, and the settings
//! that produced them.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::detector::{score_detection, Calibration, DetectionScore, DetectorConfig};
use crate::entropy::EntropySeries;
use crate::error::{EwsError, Result};
use crate::pipeline::{Detection, PipelineConfig, WindowOrders};
use crate::seed::RngSeed;
use crate::series::{SeriesFrame, Timestamp};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlarmRecord {
    /// Index into the entropy stream.
    pub window: usize,
    pub window_start: usize,
    pub window_end: usize,
    /// Timestamp of the window's last row.
    pub timestamp: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub alarms: Vec<AlarmRecord>,
    pub threshold: f64,
    pub calibration: Option<Calibration>,
    pub shifts: Vec<f64>,
    /// `SR^w` for stream positions `1..`.
    pub sr_trajectory: Vec<f64>,
    pub entropy: EntropySeries,
    pub orders: Vec<WindowOrders>,
    pub pipeline: PipelineConfig,
    pub detector: DetectorConfig,
    pub seed: RngSeed,
    /// Known change row, for synthetic series.
    pub theta: Option<usize>,
    pub score: Option<DetectionScore>,
}

impl DetectionReport {
    pub fn new(
        frame: &SeriesFrame,
        detection: Detection,
        pipeline: PipelineConfig,
        detector: DetectorConfig,
        calibration: Option<Calibration>,
        seed: RngSeed,
        theta: Option<usize>,
    ) -> Self {
        let times = detection.alarm_times();
        let windows = &detection.entropy.series.windows;
        let alarms = detection
            .run
            .alarms
            .iter()
            .map(|&k| AlarmRecord {
                window: k,
                window_start: windows[k].start,
                window_end: windows[k].end,
                timestamp: frame.timestamps()[windows[k].end].clone(),
            })
            .collect();
        let score = theta.map(|t| score_detection(&times, t));
        Self {
            alarms,
            threshold: detection.threshold,
            calibration,
            shifts: detection.run.shifts,
            sr_trajectory: detection.run.sr_trajectory,
            entropy: detection.entropy.series,
            orders: detection.entropy.orders,
            pipeline,
            detector,
            seed,
            theta,
            score,
        }
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }

    pub fn read_json<R: Read>(reader: R) -> Result<Self> {
        Ok(serde_json::from_reader(reader)?)
    }

    /// `window_start, window_end, sr_w`, aligned to stream positions `1..`.
    pub fn write_sr_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["window_start", "window_end", "sr_w"])?;
        for (w, sr) in self.entropy.windows[1..].iter().zip(&self.sr_trajectory) {
            wtr.write_record([w.start.to_string(), w.end.to_string(), sr.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Per-window BIC orders, for auditing empirical runs.
    pub fn write_orders_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["window_start", "window_end", "ar_order", "cov_lag"])?;
        for (w, o) in self.entropy.windows.iter().zip(&self.orders) {
            wtr.write_record([
                w.start.to_string(),
                w.end.to_string(),
                o.ar_order.to_string(),
                o.cov_lag.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Reads `window_start, window_end, sr_w` rows back.
pub fn read_sr_csv<R: Read>(reader: R) -> Result<Vec<(usize, usize, f64)>> {
    let mut rdr = csv::Reader::from_reader(reader);
    rdr.deserialize()
        .enumerate()
        .map(|(i, r)| {
            r.map_err(|e| EwsError::Parse {
                row: i + 2,
                message: e.to_string(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::DetectorRun;
    use crate::entropy::Variant;
    use crate::pipeline::EntropyRun;
    use crate::window::Window;

    fn toy() -> (SeriesFrame, Detection) {
        let frame =
            SeriesFrame::from_periods((0..8).map(f64::from).collect(), vec![], vec![]).unwrap();
        let windows: Vec<Window> = (0..4)
            .map(|s| Window {
                start: s,
                end: s + 4,
            })
            .collect();
        let entropy = EntropyRun {
            series: EntropySeries {
                values: vec![1.0, 1.1, 5.0, 5.2],
                windows,
                variant: Variant::Baseline,
            },
            orders: vec![
                WindowOrders {
                    ar_order: 1,
                    cov_lag: 1
                };
                4
            ],
        };
        let run = DetectorRun {
            shifts: vec![1.0],
            sr_trajectory: vec![0.5, 40.0, 2.0],
            alarms: vec![2],
        };
        (
            frame,
            Detection {
                entropy,
                run,
                threshold: 10.0,
            },
        )
    }

    #[test]
    fn alarms_carry_window_and_timestamp() {
        let (frame, det) = toy();
        let r = DetectionReport::new(
            &frame,
            det,
            PipelineConfig::default(),
            DetectorConfig::default(),
            None,
            RngSeed(1),
            Some(6),
        );
        assert_eq!(r.alarms.len(), 1);
        assert_eq!((r.alarms[0].window_start, r.alarms[0].window_end), (2, 6));
        assert_eq!(r.alarms[0].timestamp, Timestamp::Period(6));
        assert_eq!(r.score.unwrap().delay, Some(0));
    }

    #[test]
    fn json_and_csv_round_trip() {
        let (frame, det) = toy();
        let r = DetectionReport::new(
            &frame,
            det,
            PipelineConfig::default(),
            DetectorConfig::default(),
            None,
            RngSeed(1),
            None,
        );
        let mut buf = Vec::new();
        r.write_json(&mut buf).unwrap();
        assert_eq!(DetectionReport::read_json(buf.as_slice()).unwrap(), r);
        let mut sr = Vec::new();
        r.write_sr_csv(&mut sr).unwrap();
        let rows = read_sr_csv(sr.as_slice()).unwrap();
        assert_eq!(rows, vec![(1, 5, 0.5), (2, 6, 40.0), (3, 7, 2.0)]);
    }
}
