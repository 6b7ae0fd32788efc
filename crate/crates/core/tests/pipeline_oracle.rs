//! Pipeline outputs checked against values frozen from an independent
//! implementation (scipy Gaussian filter, Pillow float-mode resampling).
//! `tests/oracles/pipeline_oracle.py` regenerates them.

use metatrace_core::pipeline::{apply_sharpen, resample_plane, Interpolation, RgbImage};

const SHARPEN_5X5_ALPHA2: [u8; 75] = [
    0, 0, 255, 0, 0, 255, 59, 255, 196, 130, 18, 125, 204, 76, 51,
    0, 0, 255, 255, 255, 0, 0, 0, 255, 255, 14, 0, 0, 132, 255,
    255, 59, 0, 0, 0, 255, 255, 255, 0, 0, 7, 255, 255, 185, 0,
    18, 130, 237, 14, 255, 241, 7, 0, 248, 0, 0, 255, 0, 237, 255,
    76, 204, 179, 132, 0, 123, 185, 255, 70, 237, 0, 18, 255, 255, 0,
];

const CHECKER_2X2_BILINEAR_X2: [f64; 16] = [
    0.0, 63.75, 191.25, 255.0, 63.75, 95.625, 159.375, 191.25,
    191.25, 159.375, 95.625, 63.75, 255.0, 191.25, 63.75, 0.0,
];

const PLANE_8X8: [u8; 64] = [
    0, 37, 74, 111, 148, 185, 222, 3,
    91, 141, 191, 241, 35, 85, 135, 185,
    182, 245, 52, 115, 178, 241, 48, 111,
    17, 93, 169, 245, 65, 141, 217, 37,
    108, 197, 30, 119, 208, 41, 130, 219,
    199, 45, 147, 249, 95, 197, 43, 145,
    34, 149, 8, 123, 238, 97, 212, 71,
    125, 253, 125, 253, 125, 253, 125, 253,
];

const INTERP_8X8_R10_BILINEAR: [f64; 81] = [
    0.0, 30.833334, 63.722221, 96.611115, 129.5, 162.388885, 195.277771, 185.5, 3.0,
    75.833336, 115.69445, 158.212967, 200.731476, 136.583328, 72.435181, 114.953697, 150.361115, 154.666672,
    156.722229, 206.212967, 125.472229, 126.90432, 144.138885, 161.373459, 162.805557, 82.064812, 131.555557,
    81.166664, 140.287033, 131.447525, 166.854935, 151.694443, 136.533951, 171.94136, 137.027771, 65.777779,
    62.5, 131.25, 112.138885, 149.916656, 159.25, 118.805557, 113.916672, 165.916656, 128.0,
    143.388885, 138.805557, 92.830246, 132.978394, 166.805557, 139.793213, 100.138893, 111.84259, 190.222229,
    153.166672, 87.101852, 98.805557, 172.929016, 174.361115, 148.138901, 147.200623, 95.694443, 124.444443,
    49.166668, 146.805557, 66.064819, 99.101852, 181.916672, 181.768524, 143.694443, 181.472229, 101.333336,
    125.0, 231.666672, 160.555557, 203.222229, 189.0, 174.777771, 217.444443, 146.333328, 253.0,
];

const INTERP_8X8_RM25_BILINEAR: [f64; 36] = [
    39.57, 88.650002, 135.581818, 128.518188, 175.449997, 99.089996,
    153.449997, 157.25, 156.090912, 128.409088, 127.25, 131.050003,
    92.363632, 134.181824, 169.892563, 130.669418, 161.090912, 100.509094,
    131.009094, 110.318184, 140.834717, 144.826447, 103.409088, 161.845459,
    110.650002, 87.25, 154.636368, 162.954544, 137.25, 113.850006,
    134.929993, 155.850006, 175.145447, 176.809097, 178.649994, 184.210007,
];

const INTERP_8X8_R10_BICUBIC: [f64; 81] = [
    -3.268587, 27.457012, 60.819191, 92.936295, 129.282379, 165.628464, 205.061249, 196.861542, -7.442891,
    72.706818, 111.72287, 167.06456, 230.661255, 136.405029, 42.148811, 106.675911, 156.731812, 165.857056,
    173.747681, 235.804214, 112.802971, 109.069511, 144.138885, 179.208282, 174.759308, 55.823002, 140.866562,
    72.590378, 136.960876, 130.616333, 181.981354, 150.532578, 129.005081, 193.439484, 141.652222, 44.349907,
    43.978161, 134.755157, 106.878258, 153.296631, 168.25, 105.612144, 98.95919, 188.02861, 126.425453,
    155.48941, 150.370132, 79.333313, 124.611923, 177.428329, 144.370697, 83.474304, 99.967979, 211.998932,
    167.376282, 65.90361, 94.0755, 197.523773, 177.378937, 141.392792, 159.897385, 77.748619, 118.304245,
    33.048519, 160.051086, 46.208397, 75.932022, 196.92334, 190.616989, 129.300385, 200.33844, 87.438179,
    124.044189, 246.227203, 152.045685, 213.656982, 188.807983, 167.456924, 231.70755, 132.687988, 261.113068,
];

const INTERP_8X8_RM25_BICUBIC: [f64; 36] = [
    23.942341, 83.668137, 141.248215, 120.980621, 185.379379, 93.185997,
    164.204788, 162.28273, 155.985748, 128.63649, 122.057579, 133.643768,
    82.945549, 134.596771, 174.663635, 127.227905, 174.0401, 87.583771,
    138.242416, 107.399956, 142.567566, 146.907028, 89.957008, 176.235168,
    110.451065, 77.201385, 159.19371, 167.609955, 137.067703, 105.015732,
    136.015778, 161.205963, 172.294174, 181.373535, 182.289597, 189.012283,
];

const INTERP_8X8_R10_LANCZOS: [f64; 81] = [
    -2.877627, 27.006731, 61.034954, 89.89608, 129.310471, 164.313675, 218.045807, 188.880463, -11.750604,
    64.554077, 100.388901, 161.065292, 245.771179, 136.173401, 25.78371, 114.954582, 164.286087, 158.737411,
    184.871033, 253.747589, 115.035942, 96.866638, 145.598663, 189.186127, 162.678711, 45.099957, 161.697876,
    74.154121, 131.872253, 127.155182, 189.564667, 146.46463, 130.096664, 222.43634, 129.057419, 26.907969,
    23.337168, 131.535599, 108.728615, 148.565842, 182.217865, 83.779884, 90.480476, 208.972519, 123.690399,
    173.751938, 162.6698, 75.234612, 116.795288, 186.163193, 150.236084, 72.557205, 90.41288, 231.198441,
    165.486069, 56.816898, 79.682724, 213.403107, 174.401291, 136.512497, 167.366379, 75.977119, 101.584526,
    27.245657, 169.739502, 53.013111, 54.643772, 215.639648, 185.613739, 126.991905, 205.065887, 91.486725,
    124.290665, 247.75293, 150.826126, 218.560944, 187.591736, 165.818237, 235.689743, 128.764923, 265.96582,
];

const INTERP_8X8_RM25_LANCZOS: [f64; 36] = [
    14.067751, 83.989235, 151.310791, 107.357262, 190.098755, 98.161873,
    176.023712, 166.842758, 149.97403, 136.466431, 117.026268, 130.999664,
    85.100609, 133.637527, 158.934616, 136.357315, 180.89357, 83.422989,
    140.105789, 106.230431, 155.143753, 142.214706, 82.823273, 182.87735,
    113.137665, 68.430695, 158.36142, 172.709244, 135.248047, 99.110451,
    140.478088, 162.899353, 155.811981, 192.609955, 181.537216, 188.916046,
];

const INTERP_8X8_R10_BOX: [f64; 81] = [
    0.0, 37.0, 74.0, 111.0, 148.0, 148.0, 185.0, 222.0, 3.0,
    91.0, 141.0, 191.0, 241.0, 35.0, 35.0, 85.0, 135.0, 185.0,
    182.0, 245.0, 52.0, 115.0, 178.0, 178.0, 241.0, 48.0, 111.0,
    17.0, 93.0, 169.0, 245.0, 65.0, 65.0, 141.0, 217.0, 37.0,
    108.0, 197.0, 30.0, 119.0, 208.0, 208.0, 41.0, 130.0, 219.0,
    108.0, 197.0, 30.0, 119.0, 208.0, 208.0, 41.0, 130.0, 219.0,
    199.0, 45.0, 147.0, 249.0, 95.0, 95.0, 197.0, 43.0, 145.0,
    34.0, 149.0, 8.0, 123.0, 238.0, 238.0, 97.0, 212.0, 71.0,
    125.0, 253.0, 125.0, 253.0, 125.0, 125.0, 253.0, 125.0, 253.0,
];

const INTERP_8X8_RM25_BOX: [f64; 36] = [
    0.0, 55.5, 111.0, 148.0, 203.5, 3.0,
    136.5, 157.25, 178.0, 106.5, 127.25, 148.0,
    17.0, 131.0, 245.0, 65.0, 179.0, 37.0,
    108.0, 113.5, 119.0, 208.0, 85.5, 219.0,
    116.5, 87.25, 186.0, 166.5, 137.25, 108.0,
    125.0, 189.0, 253.0, 125.0, 189.0, 253.0,
];

const TOY_R: [[u8; 5]; 5] = [
    [0, 40, 80, 120, 160],
    [10, 200, 30, 250, 5],
    [255, 0, 255, 0, 255],
    [60, 60, 60, 60, 60],
    [90, 120, 150, 180, 210],
];

fn toy_image() -> RgbImage {
    RgbImage::from_fn(5, 5, |x, y| {
        let (x, y) = (x as usize, y as usize);
        let r = TOY_R[y][x];
        image::Rgb([r, TOY_R[x][y], 255 - r])
    })
}

fn assert_close(got: &[f64], want: &[f64], tol: f64, what: &str) {
    assert_eq!(got.len(), want.len(), "{what}: length");
    for (i, (g, w)) in got.iter().zip(want).enumerate() {
        assert!((g - w).abs() <= tol, "{what}[{i}]: got {g}, want {w}");
    }
}

#[test]
fn sharpen_matches_scipy_reflect_blur() {
    let out = apply_sharpen(&toy_image(), 2.0).unwrap();
    assert_eq!(out.as_raw().as_slice(), SHARPEN_5X5_ALPHA2.as_slice());
}

#[test]
fn sharpen_alpha_one_is_identity() {
    let img = toy_image();
    assert_eq!(apply_sharpen(&img, 1.0).unwrap(), img);
}

#[test]
fn bilinear_checker_upsample() {
    let plane = [0.0, 255.0, 255.0, 0.0];
    let out = resample_plane(&plane, 2, 2, 4, 4, Interpolation::Bilinear);
    assert_close(&out, &CHECKER_2X2_BILINEAR_X2, 1e-9, "checker");
}

#[test]
fn all_kernels_match_pillow() {
    let plane: Vec<f64> = PLANE_8X8.iter().map(|&v| v as f64).collect();
    let cases: [(Interpolation, &[f64], &[f64]); 4] = [
        (Interpolation::Bilinear, &INTERP_8X8_R10_BILINEAR, &INTERP_8X8_RM25_BILINEAR),
        (Interpolation::Bicubic, &INTERP_8X8_R10_BICUBIC, &INTERP_8X8_RM25_BICUBIC),
        (Interpolation::Lanczos, &INTERP_8X8_R10_LANCZOS, &INTERP_8X8_RM25_LANCZOS),
        (Interpolation::Box, &INTERP_8X8_R10_BOX, &INTERP_8X8_RM25_BOX),
    ];
    // Pillow accumulates in f32, hence the tolerance
    for (method, up, down) in cases {
        let out = resample_plane(&plane, 8, 8, 9, 9, method);
        assert_close(&out, up, 1e-3, method.name());
        let out = resample_plane(&plane, 8, 8, 6, 6, method);
        assert_close(&out, down, 1e-3, method.name());
    }
}
