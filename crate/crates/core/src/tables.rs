//! Published simulation tables, used as reproduction targets.

/// One row of the type I error table: `(kappa, n, [(alpha_new, alpha_lr); 6])` for
/// allocation ratios [`TYPE_ONE_PIS`].
pub type TypeOneRow = (f64, u64, [(f64, f64); 6]);

pub const TYPE_ONE_PIS: [f64; 6] = [2.0, 1.0, 0.5, 0.25, 0.125, 0.0625];

pub const TYPE_ONE: [TypeOneRow; 27] = [
    (
        0.1,
        100,
        [
            (0.041, 0.262),
            (0.044, 0.170),
            (0.047, 0.113),
            (0.055, 0.084),
            (0.064, 0.075),
            (0.107, 0.071),
        ],
    ),
    (
        0.1,
        500,
        [
            (0.044, 0.249),
            (0.047, 0.163),
            (0.052, 0.112),
            (0.053, 0.084),
            (0.050, 0.062),
            (0.056, 0.062),
        ],
    ),
    (
        0.1,
        1000,
        [
            (0.047, 0.257),
            (0.046, 0.160),
            (0.049, 0.106),
            (0.051, 0.079),
            (0.054, 0.068),
            (0.051, 0.059),
        ],
    ),
    (
        0.25,
        100,
        [
            (0.043, 0.267),
            (0.045, 0.172),
            (0.047, 0.114),
            (0.053, 0.086),
            (0.062, 0.075),
            (0.086, 0.070),
        ],
    ),
    (
        0.25,
        500,
        [
            (0.047, 0.252),
            (0.049, 0.162),
            (0.049, 0.111),
            (0.052, 0.082),
            (0.050, 0.065),
            (0.057, 0.065),
        ],
    ),
    (
        0.25,
        1000,
        [
            (0.048, 0.259),
            (0.048, 0.161),
            (0.049, 0.106),
            (0.052, 0.081),
            (0.051, 0.066),
            (0.053, 0.058),
        ],
    ),
    (
        0.5,
        100,
        [
            (0.044, 0.278),
            (0.048, 0.174),
            (0.049, 0.118),
            (0.052, 0.090),
            (0.058, 0.077),
            (0.069, 0.078),
        ],
    ),
    (
        0.5,
        500,
        [
            (0.049, 0.260),
            (0.050, 0.168),
            (0.051, 0.112),
            (0.052, 0.083),
            (0.056, 0.068),
            (0.056, 0.067),
        ],
    ),
    (
        0.5,
        1000,
        [
            (0.051, 0.263),
            (0.052, 0.164),
            (0.052, 0.112),
            (0.055, 0.083),
            (0.053, 0.068),
            (0.055, 0.061),
        ],
    ),
    (
        0.75,
        100,
        [
            (0.043, 0.289),
            (0.050, 0.184),
            (0.049, 0.126),
            (0.053, 0.093),
            (0.056, 0.080),
            (0.056, 0.082),
        ],
    ),
    (
        0.75,
        500,
        [
            (0.047, 0.272),
            (0.051, 0.173),
            (0.051, 0.116),
            (0.052, 0.084),
            (0.058, 0.076),
            (0.052, 0.066),
        ],
    ),
    (
        0.75,
        1000,
        [
            (0.053, 0.269),
            (0.053, 0.171),
            (0.052, 0.114),
            (0.054, 0.084),
            (0.050, 0.067),
            (0.051, 0.062),
        ],
    ),
    (
        1.0,
        100,
        [
            (0.036, 0.300),
            (0.051, 0.194),
            (0.049, 0.130),
            (0.052, 0.097),
            (0.052, 0.082),
            (0.052, 0.085),
        ],
    ),
    (
        1.0,
        500,
        [
            (0.047, 0.273),
            (0.050, 0.176),
            (0.052, 0.116),
            (0.052, 0.085),
            (0.053, 0.073),
            (0.052, 0.069),
        ],
    ),
    (
        1.0,
        1000,
        [
            (0.053, 0.269),
            (0.052, 0.170),
            (0.051, 0.115),
            (0.052, 0.084),
            (0.051, 0.069),
            (0.050, 0.063),
        ],
    ),
    (
        1.25,
        100,
        [
            (0.026, 0.293),
            (0.043, 0.197),
            (0.043, 0.133),
            (0.050, 0.097),
            (0.049, 0.084),
            (0.039, 0.087),
        ],
    ),
    (
        1.25,
        500,
        [
            (0.047, 0.275),
            (0.051, 0.177),
            (0.049, 0.116),
            (0.052, 0.086),
            (0.050, 0.072),
            (0.049, 0.066),
        ],
    ),
    (
        1.25,
        1000,
        [
            (0.051, 0.270),
            (0.051, 0.171),
            (0.052, 0.114),
            (0.053, 0.085),
            (0.049, 0.068),
            (0.050, 0.063),
        ],
    ),
    (
        1.5,
        100,
        [
            (0.023, 0.270),
            (0.036, 0.185),
            (0.037, 0.128),
            (0.043, 0.097),
            (0.037, 0.082),
            (0.026, 0.085),
        ],
    ),
    (
        1.5,
        500,
        [
            (0.046, 0.276),
            (0.052, 0.177),
            (0.049, 0.116),
            (0.051, 0.086),
            (0.050, 0.072),
            (0.048, 0.066),
        ],
    ),
    (
        1.5,
        1000,
        [
            (0.050, 0.271),
            (0.051, 0.172),
            (0.051, 0.116),
            (0.053, 0.084),
            (0.048, 0.067),
            (0.048, 0.064),
        ],
    ),
    (
        2.0,
        100,
        [
            (0.024, 0.261),
            (0.034, 0.174),
            (0.032, 0.122),
            (0.035, 0.090),
            (0.029, 0.077),
            (0.015, 0.082),
        ],
    ),
    (
        2.0,
        500,
        [
            (0.045, 0.276),
            (0.051, 0.177),
            (0.049, 0.116),
            (0.050, 0.087),
            (0.049, 0.072),
            (0.047, 0.065),
        ],
    ),
    (
        2.0,
        1000,
        [
            (0.049, 0.271),
            (0.052, 0.172),
            (0.050, 0.116),
            (0.053, 0.084),
            (0.048, 0.067),
            (0.048, 0.064),
        ],
    ),
    (
        5.0,
        100,
        [
            (0.024, 0.261),
            (0.034, 0.173),
            (0.032, 0.122),
            (0.035, 0.090),
            (0.029, 0.077),
            (0.014, 0.082),
        ],
    ),
    (
        5.0,
        500,
        [
            (0.045, 0.275),
            (0.051, 0.177),
            (0.049, 0.116),
            (0.050, 0.087),
            (0.049, 0.071),
            (0.047, 0.065),
        ],
    ),
    (
        5.0,
        1000,
        [
            (0.049, 0.271),
            (0.052, 0.172),
            (0.050, 0.116),
            (0.052, 0.084),
            (0.048, 0.067),
            (0.048, 0.064),
        ],
    ),
];

/// Operating characteristics at one sample size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioCells {
    pub n: u64,
    pub alpha_new: f64,
    pub alpha_lr: f64,
    pub power_new: f64,
    pub power_lr: f64,
}

/// One row of a power table: Schoenfeld-sized scenario 1 and new-test-sized
/// scenario 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerRow {
    pub kappa: f64,
    pub omega0: f64,
    pub scenario1: ScenarioCells,
    pub scenario2: ScenarioCells,
}

const fn row(kappa: f64, omega0: f64, s1: [f64; 5], s2: [f64; 5]) -> PowerRow {
    PowerRow {
        kappa,
        omega0,
        scenario1: ScenarioCells {
            n: s1[0] as u64,
            alpha_new: s1[1],
            alpha_lr: s1[2],
            power_new: s1[3],
            power_lr: s1[4],
        },
        scenario2: ScenarioCells {
            n: s2[0] as u64,
            alpha_new: s2[1],
            alpha_lr: s2[2],
            power_new: s2[3],
            power_lr: s2[4],
        },
    }
}

/// Control one-year survival 0.5.
pub const POWER_S1_050: [PowerRow; 27] = [
    row(
        0.1,
        0.50,
        [150.0, 0.048, 0.049, 0.802, 0.798],
        [123.0, 0.046, 0.050, 0.708, 0.710],
    ),
    row(
        0.1,
        0.67,
        [402.0, 0.049, 0.049, 0.805, 0.799],
        [359.0, 0.047, 0.048, 0.757, 0.752],
    ),
    row(
        0.1,
        0.80,
        [1180.0, 0.045, 0.045, 0.803, 0.798],
        [1116.0, 0.044, 0.045, 0.781, 0.776],
    ),
    row(
        0.25,
        0.50,
        [122.0, 0.048, 0.051, 0.803, 0.800],
        [111.0, 0.045, 0.049, 0.717, 0.720],
    ),
    row(
        0.25,
        0.67,
        [346.0, 0.051, 0.050, 0.809, 0.802],
        [319.0, 0.050, 0.050, 0.772, 0.764],
    ),
    row(
        0.25,
        0.80,
        [986.0, 0.049, 0.048, 0.814, 0.806],
        [957.0, 0.049, 0.049, 0.798, 0.790],
    ),
    row(
        0.5,
        0.50,
        [110.0, 0.047, 0.051, 0.809, 0.800],
        [96.0, 0.045, 0.050, 0.749, 0.743],
    ),
    row(
        0.5,
        0.67,
        [284.0, 0.049, 0.050, 0.815, 0.802],
        [270.0, 0.051, 0.051, 0.795, 0.780],
    ),
    row(
        0.5,
        0.80,
        [798.0, 0.050, 0.050, 0.818, 0.803],
        [789.0, 0.051, 0.051, 0.811, 0.797],
    ),
    row(
        0.75,
        0.50,
        [94.0, 0.049, 0.051, 0.811, 0.801],
        [84.0, 0.049, 0.056, 0.765, 0.756],
    ),
    row(
        0.75,
        0.67,
        [244.0, 0.050, 0.051, 0.816, 0.796],
        [236.0, 0.050, 0.050, 0.802, 0.782],
    ),
    row(
        0.75,
        0.80,
        [702.0, 0.053, 0.050, 0.826, 0.802],
        [698.0, 0.053, 0.049, 0.823, 0.799],
    ),
    row(
        1.0,
        0.50,
        [82.0, 0.050, 0.056, 0.810, 0.799],
        [76.0, 0.048, 0.056, 0.778, 0.766],
    ),
    row(
        1.0,
        0.67,
        [220.0, 0.051, 0.052, 0.821, 0.798],
        [216.0, 0.051, 0.052, 0.815, 0.792],
    ),
    row(
        1.0,
        0.80,
        [658.0, 0.051, 0.050, 0.826, 0.803],
        [657.0, 0.050, 0.051, 0.823, 0.801],
    ),
    row(
        1.25,
        0.50,
        [76.0, 0.037, 0.059, 0.803, 0.801],
        [70.0, 0.036, 0.058, 0.758, 0.768],
    ),
    row(
        1.25,
        0.67,
        [208.0, 0.051, 0.054, 0.817, 0.803],
        [203.0, 0.047, 0.054, 0.758, 0.768],
    ),
    row(
        1.25,
        0.80,
        [640.0, 0.051, 0.052, 0.816, 0.800],
        [639.0, 0.050, 0.052, 0.811, 0.800],
    ),
    row(
        1.5,
        0.50,
        [72.0, 0.029, 0.059, 0.731, 0.801],
        [67.0, 0.024, 0.059, 0.616, 0.764],
    ),
    row(
        1.5,
        0.67,
        [200.0, 0.045, 0.055, 0.799, 0.799],
        [198.0, 0.045, 0.055, 0.796, 0.792],
    ),
    row(
        1.5,
        0.80,
        [634.0, 0.051, 0.053, 0.814, 0.800],
        [633.0, 0.050, 0.052, 0.809, 0.792],
    ),
    row(
        2.0,
        0.50,
        [68.0, 0.027, 0.058, 0.496, 0.793],
        [66.0, 0.026, 0.059, 0.464, 0.779],
    ),
    row(
        2.0,
        0.67,
        [198.0, 0.042, 0.056, 0.757, 0.797],
        [196.0, 0.041, 0.055, 0.748, 0.792],
    ),
    row(
        2.0,
        0.80,
        [632.0, 0.053, 0.052, 0.811, 0.799],
        [631.0, 0.050, 0.052, 0.806, 0.798],
    ),
    row(
        5.0,
        0.50,
        [66.0, 0.026, 0.059, 0.402, 0.779],
        [66.0, 0.026, 0.059, 0.402, 0.779],
    ),
    row(
        5.0,
        0.67,
        [196.0, 0.041, 0.055, 0.742, 0.792],
        [195.0, 0.037, 0.055, 0.724, 0.788],
    ),
    row(
        5.0,
        0.80,
        [632.0, 0.053, 0.052, 0.811, 0.799],
        [631.0, 0.050, 0.052, 0.805, 0.798],
    ),
];

/// Control one-year survival 0.8.
pub const POWER_S1_080: [PowerRow; 27] = [
    row(
        0.1,
        0.50,
        [372.0, 0.048, 0.049, 0.785, 0.784],
        [294.0, 0.048, 0.050, 0.677, 0.675],
    ),
    row(
        0.1,
        0.67,
        [968.0, 0.049, 0.049, 0.799, 0.797],
        [845.0, 0.049, 0.049, 0.738, 0.737],
    ),
    row(
        0.1,
        0.80,
        [2736.0, 0.049, 0.049, 0.799, 0.798],
        [2554.0, 0.050, 0.050, 0.771, 0.770],
    ),
    row(
        0.25,
        0.50,
        [308.0, 0.049, 0.048, 0.787, 0.785],
        [253.0, 0.047, 0.049, 0.696, 0.696],
    ),
    row(
        0.25,
        0.67,
        [766.0, 0.047, 0.049, 0.800, 0.798],
        [693.0, 0.045, 0.046, 0.756, 0.754],
    ),
    row(
        0.25,
        0.80,
        [2032.0, 0.049, 0.050, 0.803, 0.800],
        [1995.0, 0.049, 0.049, 0.786, 0.783],
    ),
    row(
        0.5,
        0.50,
        [232.0, 0.050, 0.052, 0.796, 0.792],
        [200.0, 0.047, 0.048, 0.724, 0.721],
    ),
    row(
        0.5,
        0.67,
        [554.0, 0.048, 0.048, 0.806, 0.800],
        [523.0, 0.047, 0.048, 0.775, 0.770],
    ),
    row(
        0.5,
        0.80,
        [1386.0, 0.045, 0.045, 0.806, 0.800],
        [1376.0, 0.045, 0.046, 0.800, 0.795],
    ),
    row(
        0.75,
        0.50,
        [182.0, 0.047, 0.048, 0.801, 0.798],
        [161.0, 0.047, 0.050, 0.731, 0.732],
    ),
    row(
        0.75,
        0.67,
        [426.0, 0.048, 0.049, 0.810, 0.801],
        [412.0, 0.048, 0.049, 0.790, 0.781],
    ),
    row(
        0.75,
        0.80,
        [1048.0, 0.048, 0.048, 0.814, 0.803],
        [1054.0, 0.047, 0.048, 0.817, 0.806],
    ),
    row(
        1.0,
        0.50,
        [146.0, 0.048, 0.051, 0.805, 0.800],
        [141.0, 0.046, 0.050, 0.784, 0.782],
    ),
    row(
        1.0,
        0.67,
        [344.0, 0.050, 0.050, 0.814, 0.802],
        [354.0, 0.049, 0.048, 0.827, 0.814],
    ),
    row(
        1.0,
        0.80,
        [984.0, 0.053, 0.052, 0.818, 0.801],
        [892.0, 0.051, 0.050, 0.837, 0.819],
    ),
    row(
        1.25,
        0.50,
        [120.0, 0.047, 0.052, 0.800, 0.794],
        [110.0, 0.046, 0.050, 0.760, 0.756],
    ),
    row(
        1.25,
        0.67,
        [288.0, 0.050, 0.051, 0.817, 0.800],
        [283.0, 0.050, 0.052, 0.806, 0.791],
    ),
    row(
        1.25,
        0.80,
        [748.0, 0.052, 0.050, 0.823, 0.801],
        [792.0, 0.052, 0.051, 0.826, 0.804],
    ),
    row(
        1.5,
        0.50,
        [102.0, 0.047, 0.051, 0.806, 0.799],
        [94.0, 0.046, 0.053, 0.766, 0.759],
    ),
    row(
        1.5,
        0.67,
        [252.0, 0.049, 0.050, 0.818, 0.798],
        [246.0, 0.051, 0.051, 0.809, 0.790],
    ),
    row(
        1.5,
        0.80,
        [688.0, 0.051, 0.051, 0.817, 0.799],
        [691.0, 0.050, 0.050, 0.814, 0.799],
    ),
    row(
        2.0,
        0.50,
        [80.0, 0.043, 0.057, 0.797, 0.798],
        [71.0, 0.036, 0.056, 0.707, 0.735],
    ),
    row(
        2.0,
        0.67,
        [212.0, 0.048, 0.056, 0.803, 0.799],
        [202.0, 0.046, 0.054, 0.785, 0.776],
    ),
    row(
        2.0,
        0.80,
        [644.0, 0.051, 0.052, 0.815, 0.802],
        [631.0, 0.049, 0.052, 0.800, 0.793],
    ),
    row(
        5.0,
        0.50,
        [66.0, 0.026, 0.059, 0.402, 0.779],
        [66.0, 0.026, 0.059, 0.402, 0.779],
    ),
    row(
        5.0,
        0.67,
        [196.0, 0.041, 0.055, 0.742, 0.792],
        [196.0, 0.041, 0.055, 0.742, 0.792],
    ),
    row(
        5.0,
        0.80,
        [632.0, 0.053, 0.052, 0.811, 0.799],
        [631.0, 0.050, 0.052, 0.805, 0.798],
    ),
];

/// Control one-year survival 0.2.
pub const POWER_S1_020: [PowerRow; 27] = [
    row(
        0.1,
        0.50,
        [92.0, 0.051, 0.053, 0.815, 0.804],
        [79.0, 0.047, 0.055, 0.736, 0.736],
    ),
    row(
        0.1,
        0.67,
        [252.0, 0.049, 0.051, 0.814, 0.799],
        [235.0, 0.048, 0.052, 0.782, 0.770],
    ),
    row(
        0.1,
        0.80,
        [768.0, 0.051, 0.051, 0.817, 0.804],
        [743.0, 0.050, 0.048, 0.802, 0.790],
    ),
    row(
        0.25,
        0.50,
        [86.0, 0.052, 0.049, 0.818, 0.801],
        [75.0, 0.045, 0.057, 0.745, 0.743],
    ),
    row(
        0.25,
        0.67,
        [234.0, 0.052, 0.049, 0.818, 0.801],
        [222.0, 0.054, 0.053, 0.803, 0.781],
    ),
    row(
        0.25,
        0.80,
        [706.0, 0.055, 0.052, 0.824, 0.806],
        [694.0, 0.053, 0.052, 0.815, 0.798],
    ),
    row(
        0.5,
        0.50,
        [78.0, 0.040, 0.058, 0.818, 0.808],
        [71.0, 0.033, 0.057, 0.748, 0.761],
    ),
    row(
        0.5,
        0.67,
        [214.0, 0.055, 0.054, 0.833, 0.805],
        [207.0, 0.053, 0.055, 0.821, 0.788],
    ),
    row(
        0.5,
        0.80,
        [654.0, 0.053, 0.051, 0.832, 0.803],
        [650.0, 0.055, 0.051, 0.830, 0.800],
    ),
    row(
        0.75,
        0.50,
        [72.0, 0.030, 0.059, 0.750, 0.799],
        [68.0, 0.029, 0.059, 0.709, 0.776],
    ),
    row(
        0.75,
        0.67,
        [204.0, 0.051, 0.056, 0.823, 0.801],
        [200.0, 0.048, 0.055, 0.816, 0.795],
    ),
    row(
        0.75,
        0.80,
        [636.0, 0.052, 0.051, 0.822, 0.799],
        [635.0, 0.052, 0.053, 0.817, 0.798],
    ),
    row(
        1.0,
        0.50,
        [68.0, 0.027, 0.059, 0.599, 0.789],
        [66.0, 0.026, 0.060, 0.568, 0.775],
    ),
    row(
        1.0,
        0.67,
        [198.0, 0.044, 0.055, 0.784, 0.797],
        [197.0, 0.039, 0.054, 0.764, 0.792],
    ),
    row(
        1.0,
        0.80,
        [632.0, 0.053, 0.052, 0.815, 0.798],
        [632.0, 0.053, 0.052, 0.815, 0.798],
    ),
    row(
        1.25,
        0.50,
        [68.0, 0.027, 0.058, 0.506, 0.793],
        [66.0, 0.026, 0.059, 0.476, 0.779],
    ),
    row(
        1.25,
        0.67,
        [198.0, 0.042, 0.056, 0.760, 0.798],
        [196.0, 0.041, 0.055, 0.751, 0.792],
    ),
    row(
        1.25,
        0.80,
        [632.0, 0.053, 0.052, 0.812, 0.799],
        [631.0, 0.050, 0.052, 0.808, 0.798],
    ),
    row(
        1.5,
        0.50,
        [66.0, 0.026, 0.059, 0.424, 0.779],
        [66.0, 0.026, 0.059, 0.424, 0.779],
    ),
    row(
        1.5,
        0.67,
        [196.0, 0.041, 0.055, 0.744, 0.792],
        [196.0, 0.041, 0.055, 0.744, 0.792],
    ),
    row(
        1.5,
        0.80,
        [632.0, 0.053, 0.052, 0.811, 0.799],
        [631.0, 0.050, 0.052, 0.805, 0.798],
    ),
    row(
        2.0,
        0.50,
        [66.0, 0.026, 0.059, 0.403, 0.779],
        [66.0, 0.026, 0.059, 0.403, 0.779],
    ),
    row(
        2.0,
        0.67,
        [196.0, 0.041, 0.055, 0.742, 0.792],
        [196.0, 0.041, 0.055, 0.742, 0.792],
    ),
    row(
        2.0,
        0.80,
        [632.0, 0.053, 0.052, 0.811, 0.799],
        [630.0, 0.052, 0.052, 0.809, 0.798],
    ),
    row(
        5.0,
        0.50,
        [66.0, 0.026, 0.059, 0.402, 0.779],
        [66.0, 0.026, 0.059, 0.402, 0.779],
    ),
    row(
        5.0,
        0.67,
        [196.0, 0.041, 0.055, 0.742, 0.792],
        [195.0, 0.037, 0.055, 0.724, 0.788],
    ),
    row(
        5.0,
        0.80,
        [632.0, 0.053, 0.052, 0.811, 0.799],
        [631.0, 0.050, 0.052, 0.805, 0.798],
    ),
];
