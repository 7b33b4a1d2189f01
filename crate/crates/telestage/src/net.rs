//! Record streams over TCP (or any `Read`/`Write`) and the `send`/`serve`
//! endpoints.

use std::io::{self, Read, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::thread;

use anyhow::{Context, Result};
use log::{debug, info, warn};
use thiserror::Error;

use telestage_core::codec::EncodedFrame;
use telestage_core::transport::{
    write_record_into, ClockProbe, HapticBlock, Meter, MeterSample, RecordDecoder, RecordType, StageStamps, TrafficReport, TransportError, WireRecord,
};

use crate::clock::{now_us, sleep_until_us};
use crate::formats;
use crate::frame::decode_frame;

#[derive(Debug, Error)]
pub enum NetError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Codec(#[from] telestage_core::codec::CodecError),
    #[error("stream ended inside a record ({0} bytes pending)")]
    Truncated(usize),
}

/// Pulls whole records out of a byte stream.
pub struct RecordReader<R> {
    inner: R,
    dec: RecordDecoder,
    buf: Vec<u8>,
}

impl<R: Read> RecordReader<R> {
    pub fn new(inner: R) -> Self {
        RecordReader { inner, dec: RecordDecoder::new(), buf: vec![0; 64 * 1024] }
    }

    /// `None` on a clean end of stream.
    pub fn next_record(&mut self) -> Result<Option<WireRecord>, NetError> {
        loop {
            if let Some(r) = self.dec.next_record()? {
                return Ok(Some(r));
            }
            let n = match self.inner.read(&mut self.buf) {
                Ok(n) => n,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
                Err(e) => return Err(e.into()),
            };
            if n == 0 {
                return match self.dec.pending() {
                    0 => Ok(None),
                    p => Err(NetError::Truncated(p)),
                };
            }
            self.dec.feed(&self.buf[..n]);
        }
    }

    pub fn bytes_consumed(&self) -> u64 {
        self.dec.consumed()
    }
}

/// Writes records, flushing after each batch.
pub struct RecordWriter<W> {
    inner: W,
    scratch: Vec<u8>,
}

impl<W: Write> RecordWriter<W> {
    pub fn new(inner: W) -> Self {
        RecordWriter { inner, scratch: Vec::new() }
    }

    /// Returns the wire bytes written.
    pub fn send(&mut self, recs: &[&WireRecord]) -> Result<usize, NetError> {
        self.scratch.clear();
        for r in recs {
            write_record_into(r, &mut self.scratch)?;
        }
        self.inner.write_all(&self.scratch)?;
        self.inner.flush()?;
        Ok(self.scratch.len())
    }

    /// Sends a clock probe stamped with the current time followed by the
    /// frame. Returns the probe and the wire bytes written.
    pub fn send_frame(&mut self, mut probe: ClockProbe, frame: &EncodedFrame) -> Result<(ClockProbe, usize), NetError> {
        let frame_rec = WireRecord::new(RecordType::Frame, frame.to_bytes()?);
        probe.send_ts_us = now_us().max(probe.encode_done_us);
        let probe_rec = WireRecord::new(RecordType::ClockProbe, probe.to_bytes());
        let n = self.send(&[&probe_rec, &frame_rec])?;
        Ok((probe, n))
    }

    pub fn into_inner(self) -> W {
        self.inner
    }
}

pub fn connect(addr: impl ToSocketAddrs + std::fmt::Debug) -> Result<TcpStream> {
    let s = TcpStream::connect(&addr).with_context(|| format!("connecting to {addr:?}"))?;
    s.set_nodelay(true)?;
    Ok(s)
}

#[derive(Debug, Clone)]
pub struct SendOptions {
    pub fps: f64,
    /// Optional 3-channel accelerometer WAV streamed alongside in 100 ms blocks.
    pub haptics: Option<PathBuf>,
    pub sensor_id: u16,
}

enum Outgoing {
    Frame(PathBuf),
    Haptic(HapticBlock),
}

/// Streams every frame file of `dir` in `(seq, unit)` order, one sequence
/// number per `1 / fps` seconds. Returns the wire bytes sent.
pub fn send_dir(stream: TcpStream, dir: &Path, opts: &SendOptions) -> Result<u64> {
    let frames = formats::list_frames(dir)?;
    let period_us = 1e6 / opts.fps;
    let mut queue: Vec<(u64, Outgoing)> = frames.into_iter().map(|((seq, _), p)| ((seq as f64 * period_us) as u64, Outgoing::Frame(p))).collect();
    if let Some(wav) = &opts.haptics {
        let s = formats::read_accel_wav(wav, opts.sensor_id, telestage_core::haptics::DEFAULT_SCALE)?;
        let per = (s.sample_rate_hz / 10.0).round().max(1.0) as usize;
        for (i, chunk) in s.samples.chunks(per).enumerate() {
            let offset_us = (i * per) as f64 * 1e6 / s.sample_rate_hz;
            let end_us = offset_us + chunk.len() as f64 * 1e6 / s.sample_rate_hz;
            let block = HapticBlock { sensor_id: opts.sensor_id, start_ts_us: offset_us as u64, sample_rate_hz: s.sample_rate_hz as u32, samples: chunk.to_vec() };
            queue.push((end_us as u64, Outgoing::Haptic(block)));
        }
    }
    queue.sort_by_key(|(t, _)| *t);
    let mut w = RecordWriter::new(stream);
    let t0 = now_us();
    let mut total = 0u64;
    for (due, item) in queue {
        sleep_until_us(t0 + due);
        match item {
            Outgoing::Frame(p) => {
                let f = formats::read_frame_file(&p)?;
                let now = now_us();
                let probe = ClockProbe { unit_id: f.unit_id, seq: f.seq, capture_ts_us: now, encode_done_us: now, send_ts_us: 0 };
                total += w.send_frame(probe, &f)?.1 as u64;
            }
            Outgoing::Haptic(mut b) => {
                b.start_ts_us += t0;
                total += w.send(&[&WireRecord::new(RecordType::Haptic, b.to_bytes())])? as u64;
            }
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, Default)]
pub struct ServeOptions {
    /// Connections to handle before returning.
    pub connections: usize,
    /// Where to store received frames, if anywhere.
    pub out: Option<PathBuf>,
}

/// Receives `connections` streams, decodes frames and meters everything.
/// Frames have no render stage here, so `render_done` equals `decode_done`.
pub fn serve(listener: TcpListener, opts: &ServeOptions) -> Result<TrafficReport> {
    if let Some(d) = &opts.out {
        std::fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
    }
    let (tx, rx) = mpsc::channel::<Result<Meter>>();
    let mut handles = Vec::new();
    for _ in 0..opts.connections.max(1) {
        let (stream, peer) = listener.accept()?;
        stream.set_nodelay(true)?;
        info!("connection from {peer}");
        let tx = tx.clone();
        let out = opts.out.clone();
        handles.push(thread::spawn(move || {
            let _ = tx.send(serve_one(stream, out.as_deref()));
        }));
    }
    drop(tx);
    let mut total = Meter::new();
    for m in rx {
        total.merge(&m?);
    }
    for h in handles {
        let _ = h.join();
    }
    Ok(total.report(None)?)
}

fn serve_one(stream: TcpStream, out: Option<&Path>) -> Result<Meter> {
    let mut r = RecordReader::new(stream);
    let mut meter = Meter::new();
    let mut probe: Option<(ClockProbe, usize)> = None;
    while let Some(rec) = r.next_record()? {
        let recv_ts = now_us();
        let bytes = rec.wire_len();
        match rec.record_type {
            RecordType::ClockProbe => {
                probe = Some((ClockProbe::from_bytes(&rec.payload)?, bytes));
                continue;
            }
            RecordType::Frame => {
                let e = EncodedFrame::from_bytes(&rec.payload)?;
                let f = decode_frame(&e)?;
                let decode_done = now_us();
                if let Some(dir) = out {
                    formats::write_frame_file(dir, &e)?;
                }
                let (stamps, extra) = match probe.take() {
                    Some((p, n)) if p.unit_id == e.unit_id && p.seq == e.seq => (
                        Some(StageStamps {
                            capture_ts: p.capture_ts_us,
                            encode_done: p.encode_done_us,
                            send_ts: p.send_ts_us,
                            recv_ts,
                            decode_done,
                            render_done: decode_done,
                        }),
                        n,
                    ),
                    _ => {
                        warn!("frame {}/{} arrived without a matching clock probe", e.unit_id, e.seq);
                        (None, 0)
                    }
                };
                if extra > 0 {
                    meter.record(&MeterSample { record_type: RecordType::ClockProbe, wire_bytes: extra as u64, ts_us: recv_ts, points: None, stamps: None });
                }
                let points = Some(f.valid_depth_count() as u64);
                meter.record(&MeterSample { record_type: RecordType::Frame, wire_bytes: bytes as u64, ts_us: recv_ts, points, stamps });
            }
            RecordType::Haptic => {
                let b = HapticBlock::from_bytes(&rec.payload)?;
                debug!("haptic block sensor {} n {}", b.sensor_id, b.samples.len());
                meter.record(&MeterSample { record_type: RecordType::Haptic, wire_bytes: bytes as u64, ts_us: recv_ts, points: None, stamps: None });
            }
            t @ RecordType::Other(_) => {
                debug!("skipping record type {}", t.code());
                meter.record(&MeterSample { record_type: t, wire_bytes: bytes as u64, ts_us: recv_ts, points: None, stamps: None });
            }
        }
    }
    Ok(meter)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reader_handles_split_reads() {
        let recs = [WireRecord::new(RecordType::Haptic, vec![]), WireRecord::new(RecordType::Frame, vec![7; 300]), WireRecord::new(RecordType::Other(9), vec![1])];
        let mut w = RecordWriter::new(Vec::new());
        w.send(&recs.iter().collect::<Vec<_>>()).unwrap();
        let bytes = w.into_inner();
        assert_eq!(bytes.len(), 5 + 305 + 6);

        // reads of 7 bytes at a time
        struct Trickle(Vec<u8>, usize);
        impl Read for Trickle {
            fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
                let n = (self.0.len() - self.1).min(7).min(buf.len());
                buf[..n].copy_from_slice(&self.0[self.1..self.1 + n]);
                self.1 += n;
                Ok(n)
            }
        }
        let mut r = RecordReader::new(Trickle(bytes.clone(), 0));
        for want in &recs {
            assert_eq!(&r.next_record().unwrap().unwrap(), want);
        }
        assert!(r.next_record().unwrap().is_none());
        assert_eq!(r.bytes_consumed(), bytes.len() as u64);

        let mut r = RecordReader::new(&bytes[..bytes.len() - 1]);
        r.next_record().unwrap();
        r.next_record().unwrap();
        assert!(matches!(r.next_record(), Err(NetError::Truncated(5))));
    }

    #[test]
    fn poisoned_stream_errors() {
        let mut r = RecordReader::new(&[0u8, 0, 0, 0, 0][..]);
        assert!(matches!(r.next_record(), Err(NetError::Transport(TransportError::ZeroType))));
        assert!(matches!(r.next_record(), Err(NetError::Transport(TransportError::Poisoned))));
    }
}
