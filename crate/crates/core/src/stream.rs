use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Channel ids used by the simulators.
pub const SIGNAL: u8 = 0;
pub const IDLER: u8 = 1;

/// Default time-to-digital converter bin, in picoseconds.
pub const DEFAULT_RESOLUTION_PS: u32 = 81;

/// One detection record. `time` is in picoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tag {
    pub time: u64,
    pub channel: u8,
}

impl Tag {
    pub fn new(time: u64, channel: u8) -> Self {
        Tag { time, channel }
    }
}

/// How a stream came to be. Not persisted in the binary tag format.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Origin {
    pub mode: String,
    pub seed: Option<u64>,
    pub config_hash: Option<String>,
    pub duration_s: Option<f64>,
    /// Candidate events whose thermal intensity exceeded the thinning bound.
    pub bound_exceedances: u64,
}

/// A time ordered list of detection records.
///
/// Every timestamp is a whole number of `resolution` ticks, expressed in
/// picoseconds.
#[derive(Debug, Clone, PartialEq)]
pub struct TagStream {
    tags: Vec<Tag>,
    resolution: u32,
    channel_count: u8,
    pub origin: Origin,
}

impl TagStream {
    /// Builds a stream, checking order, channel range and quantization.
    pub fn new(tags: Vec<Tag>, resolution: u32, channel_count: u8) -> Result<Self> {
        if resolution == 0 {
            return Err(Error::invalid("resolution", "must be positive"));
        }
        for (i, t) in tags.iter().enumerate() {
            if i > 0 && t.time < tags[i - 1].time {
                return Err(Error::Unsorted { index: i });
            }
            if t.channel >= channel_count {
                return Err(Error::Format(format!(
                    "record {i} uses channel {} but only {channel_count} are declared",
                    t.channel
                )));
            }
            if t.time % resolution as u64 != 0 {
                return Err(Error::Format(format!(
                    "record {i} at {} ps is not a multiple of the {resolution} ps resolution",
                    t.time
                )));
            }
        }
        Ok(TagStream {
            tags,
            resolution,
            channel_count,
            origin: Origin::default(),
        })
    }

    /// Sorts by time (stable on ties) and then builds the stream.
    pub fn from_unsorted(mut tags: Vec<Tag>, resolution: u32, channel_count: u8) -> Result<Self> {
        tags.sort_by_key(|t| t.time);
        Self::new(tags, resolution, channel_count)
    }

    pub(crate) fn from_parts_unchecked(tags: Vec<Tag>, resolution: u32, channel_count: u8) -> Self {
        debug_assert!(tags.windows(2).all(|w| w[0].time <= w[1].time));
        TagStream {
            tags,
            resolution,
            channel_count,
            origin: Origin::default(),
        }
    }

    pub fn empty(resolution: u32, channel_count: u8) -> Self {
        Self::from_parts_unchecked(Vec::new(), resolution, channel_count)
    }

    pub fn tags(&self) -> &[Tag] {
        &self.tags
    }

    pub fn into_tags(self) -> Vec<Tag> {
        self.tags
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    pub fn channel_count(&self) -> u8 {
        self.channel_count
    }

    pub fn with_origin(mut self, origin: Origin) -> Self {
        self.origin = origin;
        self
    }

    /// Timestamps on a single channel, in order.
    pub fn channel_times(&self, channel: u8) -> Vec<u64> {
        self.tags
            .iter()
            .filter(|t| t.channel == channel)
            .map(|t| t.time)
            .collect()
    }

    pub fn count(&self, channel: u8) -> usize {
        self.tags.iter().filter(|t| t.channel == channel).count()
    }

    /// Span from the first to the last record, in seconds.
    pub fn span_s(&self) -> f64 {
        match (self.tags.first(), self.tags.last()) {
            (Some(a), Some(b)) => (b.time - a.time) as f64 * 1e-12,
            _ => 0.0,
        }
    }

    /// Acquisition time: the simulated duration when known, else the span.
    pub fn acquisition_s(&self) -> f64 {
        self.origin.duration_s.unwrap_or_else(|| self.span_s())
    }

    /// Shifts every record by a whole number of ticks.
    pub fn shifted(&self, ticks: u64) -> Self {
        let dt = ticks * self.resolution as u64;
        let tags = self.tags.iter().map(|t| Tag::new(t.time + dt, t.channel)).collect();
        let mut s = Self::from_parts_unchecked(tags, self.resolution, self.channel_count);
        s.origin = self.origin.clone();
        s
    }
}

/// Merges individually sorted tag runs. Runs that follow each other in time
/// and overlap only at their edges merge in near-linear time.
pub fn merge_sorted(runs: Vec<Vec<Tag>>) -> Vec<Tag> {
    let mut out: Vec<Tag> = runs.concat();
    // the stable sort detects the presorted runs
    out.sort();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unsorted_and_foreign_channels() {
        let bad = vec![Tag::new(10, 0), Tag::new(5, 1)];
        assert!(matches!(
            TagStream::new(bad.clone(), 1, 2),
            Err(Error::Unsorted { index: 1 })
        ));
        assert!(TagStream::from_unsorted(bad, 1, 2).is_ok());
        assert!(TagStream::new(vec![Tag::new(0, 3)], 1, 2).is_err());
        assert!(TagStream::new(vec![Tag::new(5, 0)], 2, 1).is_err());
    }

    #[test]
    fn merge_keeps_order() {
        let a = vec![Tag::new(1, 0), Tag::new(4, 0), Tag::new(9, 0)];
        let b = vec![Tag::new(2, 1), Tag::new(4, 1)];
        let m = merge_sorted(vec![a, b]);
        let times: Vec<u64> = m.iter().map(|t| t.time).collect();
        assert_eq!(times, vec![1, 2, 4, 4, 9]);
    }
}
