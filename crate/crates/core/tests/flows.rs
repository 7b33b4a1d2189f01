//! Cross-module flows through the core crate: capture to fusion, and
//! footstep sensing to floor commands.

use telestage_core::capture::{is_valid_depth, render_ground_truth, sample_unit, schedule_sweeps, BoxObject, SampleParams, SceneConfig, SweepSchedule, Texture};
use telestage_core::codec::{qoi16_decode, qoi16_encode, EncodedFrame};
use telestage_core::densify::{DensifyConfig, Densifier};
use telestage_core::floor::{map_step, plan_actuators, Pattern, PlanRequest};
use telestage_core::fusion::{fuse_render, BiasConfig, UnitView, VirtualCamera};
use telestage_core::geometry::{Intrinsics, Pose, UnitCalibration, Vec3};
use telestage_core::haptics::{gait_gate, synth_gait, GaitSpec, GateConfig};
use telestage_core::transport::{meter, HapticBlock, MeterSample, RecordDecoder, RecordType, WireRecord};
use telestage_core::transport::write_record;

fn unit(id: u16, angle_deg: f64) -> UnitCalibration {
    let a = angle_deg.to_radians();
    let eye = Vec3::new(3.0 * a.sin(), -3.0 * a.cos(), 1.3);
    let k = Intrinsics::from_hfov(96, 72, 70.0).unwrap();
    UnitCalibration::new(id, k, Pose::look_at(eye, Vec3::new(0.0, 0.0, 1.0), Vec3::z()).unwrap()).unwrap()
}

fn stage() -> SceneConfig {
    let mut s = SceneConfig::empty([8.0, 8.0, 3.0]);
    s.room_color = Some([120, 110, 100]);
    s.boxes.push(BoxObject { min: [-0.4, -0.4, 0.0], max: [0.4, 0.4, 1.2], color: [40, 160, 60], texture: Texture { amplitude: 40, cell_m: 0.1 } });
    s
}

#[test]
fn capture_densify_codec_fuse() {
    let scene = stage();
    let cals = [unit(0, -45.0), unit(1, 45.0)];
    let plan = schedule_sweeps(&SweepSchedule::staggered(3, 10.0), 30.0).unwrap();
    let params = SampleParams { noise_sigma_m: 0.0, dropout: 0.5, seed: 9 };
    let mut dens: Vec<Densifier> = cals.iter().map(|_| Densifier::new(DensifyConfig::default())).collect();
    let mut last = Vec::new();
    for seq in 0..4u32 {
        last.clear();
        for (cal, d) in cals.iter().zip(&mut dens) {
            let mut gt = render_ground_truth(&scene, cal, seq as f64 / 30.0);
            gt.seq = seq;
            let sparse = sample_unit(&gt, &plan.phase(seq as u64), &params).unwrap();
            let (fused, _) = d.process(&sparse).unwrap();
            assert!(fused.coverage() >= sparse.coverage());

            // depth survives the wire bit for bit
            let q = qoi16_encode(&fused.depth).unwrap();
            let e = EncodedFrame { unit_id: cal.unit_id, seq, capture_ts_us: fused.capture_ts_us, rgb_payload: vec![], depth_payload: q };
            let back = EncodedFrame::from_bytes(&e.to_bytes().unwrap()).unwrap();
            assert_eq!(qoi16_decode(&back.depth_payload).unwrap(), fused.depth);
            last.push(fused);
        }
    }
    // a static scene with noise-free samples fills most pixels after history
    assert!(last.iter().all(|f| f.coverage() > 0.8));

    let cam = VirtualCamera::new(Intrinsics::from_hfov(96, 72, 70.0).unwrap(), Pose::look_at(Vec3::new(0.0, -3.0, 1.3), Vec3::new(0.0, 0.0, 1.0), Vec3::z()).unwrap()).unwrap();
    let views: Vec<UnitView> = last.iter().zip(&cals).map(|(frame, cal)| UnitView { frame, cal }).collect();
    let out = fuse_render(&views, &cam, &BiasConfig::default()).unwrap();
    assert!(out.valid_count() > 96 * 72 / 2);
    // both units contribute to the center view
    let winners: std::collections::BTreeSet<u16> = out.source.as_slice().iter().flatten().copied().collect();
    assert_eq!(winners.len(), 2);
    assert!(out.depth.as_slice().iter().all(|&z| z == 0.0 || z > 0.5));
    assert!(last[0].depth.as_slice().iter().any(|&d| is_valid_depth(d)));
}

#[test]
fn footsteps_to_floor_commands() {
    let spec = GaitSpec { n_steps: 12, cadence_hz: 1.5, seed: 4, ..GaitSpec::default() };
    let (stream, onsets) = synth_gait(&spec);

    // ship the samples as haptic records and reassemble them
    let mut dec = RecordDecoder::new();
    let mut samples_meter = Vec::new();
    for (i, chunk) in stream.samples.chunks(100).enumerate() {
        let b = HapticBlock { sensor_id: stream.sensor_id, start_ts_us: i as u64 * 100_000, sample_rate_hz: 1000, samples: chunk.to_vec() };
        let bytes = write_record(&WireRecord::new(RecordType::Haptic, b.to_bytes())).unwrap();
        samples_meter.push(MeterSample { record_type: RecordType::Haptic, wire_bytes: bytes.len() as u64, ts_us: i as u64 * 100_000, points: None, stamps: None });
        dec.feed(&bytes);
    }
    let mut rebuilt = stream.clone();
    rebuilt.samples.clear();
    while let Some(r) = dec.next_record().unwrap() {
        rebuilt.samples.extend(HapticBlock::from_bytes(&r.payload).unwrap().samples);
    }
    assert_eq!(rebuilt, stream);
    let rate = meter(&samples_meter, None).unwrap().bitrate_bps.unwrap();
    // 6 bytes per sample at 1 kHz plus per-block headers
    assert!((48_000.0..52_000.0).contains(&rate), "{rate}");

    let gate = GateConfig { position: [3.3, 1.5], ..GateConfig::default() };
    let g = gait_gate(&rebuilt, &gate).unwrap();
    assert_eq!(g.events.len(), onsets.len());

    let plan = plan_actuators(&PlanRequest::new(6, 10, 8, 6.0, 12.0)).unwrap().plan;
    let mut cmds = Vec::new();
    for ev in &g.events {
        let c = map_step(ev, &plan, Pattern::localized()).unwrap();
        assert!(!c.is_empty());
        assert!(c.iter().all(|c| c.onset_t == ev.t && c.gain > 0.0 && c.gain <= 1.0));
        cmds.extend(c);
    }
    let wide = map_step(&g.events[0], &plan, Pattern::FloorWide).unwrap();
    assert_eq!(wide.len(), plan.actuators().len());
    assert!(cmds.len() >= g.events.len());
}
