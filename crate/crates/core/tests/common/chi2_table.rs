/// Chi-squared quantiles to three decimals, as printed in standard tables.
/// Columns: df, lower 0.025, lower 0.05, upper 0.025, upper 0.05, where
/// "lower a" is x with P(X <= x) = a and "upper a" is x with P(X > x) = a.
pub const CHI2_TABLE: [(u32, f64, f64, f64, f64); 30] = [
    (1, 0.001, 0.004, 5.024, 3.841),
    (2, 0.051, 0.103, 7.378, 5.991),
    (3, 0.216, 0.352, 9.348, 7.815),
    (4, 0.484, 0.711, 11.143, 9.488),
    (5, 0.831, 1.145, 12.833, 11.070),
    (6, 1.237, 1.635, 14.449, 12.592),
    (7, 1.690, 2.167, 16.013, 14.067),
    (8, 2.180, 2.733, 17.535, 15.507),
    (9, 2.700, 3.325, 19.023, 16.919),
    (10, 3.247, 3.940, 20.483, 18.307),
    (11, 3.816, 4.575, 21.920, 19.675),
    (12, 4.404, 5.226, 23.337, 21.026),
    (13, 5.009, 5.892, 24.736, 22.362),
    (14, 5.629, 6.571, 26.119, 23.685),
    (15, 6.262, 7.261, 27.488, 24.996),
    (16, 6.908, 7.962, 28.845, 26.296),
    (17, 7.564, 8.672, 30.191, 27.587),
    (18, 8.231, 9.390, 31.526, 28.869),
    (19, 8.907, 10.117, 32.852, 30.144),
    (20, 9.591, 10.851, 34.170, 31.410),
    (21, 10.283, 11.591, 35.479, 32.671),
    (22, 10.982, 12.338, 36.781, 33.924),
    (23, 11.689, 13.091, 38.076, 35.172),
    (24, 12.401, 13.848, 39.364, 36.415),
    (25, 13.120, 14.611, 40.646, 37.652),
    (26, 13.844, 15.379, 41.923, 38.885),
    (27, 14.573, 16.151, 43.195, 40.113),
    (28, 15.308, 16.928, 44.461, 41.337),
    (29, 16.047, 17.708, 45.722, 42.557),
    (30, 16.791, 18.493, 46.979, 43.773),
];
