"""Physical constants and unit conversions shared across the package.

Internal units are km, s, rad everywhere. Reports may convert to km/d
and degrees at the presentation layer only.
"""

# Earth gravitational parameter, km^3/s^2
MU_EARTH_KM3_S2 = 398600.4418

# Earth rotation rate, rad/s
OMEGA_EARTH_RAD_S = 7.2921150e-5

# Epoch at which the station rotation angle is defined to be zero (MJD)
ROTATION_REFERENCE_MJD = 54127.0

SECONDS_PER_DAY = 86400.0
