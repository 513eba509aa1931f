use rmtdp::harness::make_planted_matrix;
use rmtdp::rmt::io;
use rmtdp::rng::SeedStreams;
use rmtdp::{bulk_edge, denoise_gated, denoise_optimal, DenoiseConfig, NoiseSpec};

#[test]
fn planted_rank_three_is_recovered_through_the_gate() {
    let noise = NoiseSpec::new(0.05).unwrap();
    let mut rng = SeedStreams::new(21).stream("planted");
    let p = make_planted_matrix(120, 90, &[4.0, 3.0, 2.0], noise, &mut rng).unwrap();
    let plain = DenoiseConfig { norm_correction: false, ..DenoiseConfig::default() };
    let (out, report) = denoise_gated(&p.noisy, noise, &plain).unwrap();
    assert!(report.applied);
    assert_eq!(report.retained_rank, Some(3));
    assert!(report.gate_ratio > plain.kappa);
    assert_eq!(out, denoise_optimal(&p.noisy, noise).unwrap());
    assert!(out.frobenius_distance(&p.signal) < 0.5 * p.noisy.frobenius_distance(&p.signal));
    for s in &report.shrunk_values {
        assert!(s.shrunk < s.noisy && s.shrunk > 0.0);
    }

    let (corrected, report) = denoise_gated(&p.noisy, noise, &DenoiseConfig::default()).unwrap();
    let factor = report.norm_rescale_factor.unwrap();
    assert!(factor > 1.0);
    assert!((corrected.frobenius_norm() / p.noisy.frobenius_norm() - 1.0).abs() < 1e-10);
}

#[test]
fn pure_noise_rarely_opens_the_default_gate() {
    let noise = NoiseSpec::new(1.0).unwrap();
    let config = DenoiseConfig::default();
    let opened = (0..20)
        .filter(|&t| {
            let mut rng = SeedStreams::new(5).indexed(t);
            let p = make_planted_matrix(64, 32, &[], noise, &mut rng).unwrap();
            let (out, report) = denoise_gated(&p.noisy, noise, &config).unwrap();
            assert!(report.gate_ratio < 1.2 && report.gate_ratio > 0.8);
            if !report.applied {
                assert_eq!(out, p.noisy);
            }
            report.applied
        })
        .count();
    assert_eq!(opened, 0);
    assert!(bulk_edge(noise, 64, 32) > 0.0);
}

#[test]
fn denoised_matrix_survives_both_file_formats() {
    let noise = NoiseSpec::new(0.1).unwrap();
    let mut rng = SeedStreams::new(8).stream("planted");
    let p = make_planted_matrix(30, 40, &[3.0], noise, &mut rng).unwrap();
    let (out, _) = denoise_gated(&p.noisy, noise, &DenoiseConfig::default()).unwrap();
    assert_eq!(io::decode(&io::encode_binary(&out)).unwrap(), out);
    assert_eq!(io::decode(io::encode_csv(&out).as_bytes()).unwrap(), out);
}
