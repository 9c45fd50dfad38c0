"""Independent hand-evaluation oracle for the frozen constants in the unit tests.

Run with: python3 tests/oracles/link_budget_oracle.py
"""
import math

RE = 6378.0
r, w0, lam, zen = 0.75, 0.025, 810e-9, 0.5

LR = math.pi * w0**2 / lam
print("rayleigh_range_m", repr(LR))


def waist(Lm):
    return w0 * math.sqrt(1 + (Lm / LR) ** 2)


def eta_fs(Lkm, rr=r):
    return 1 - math.exp(-2 * rr**2 / waist(Lkm * 1e3) ** 2)


def cos_zen(L, h):
    return h / L - (L * L - h * h) / (2 * RE * L)


def eta_atm(L, h):
    c = max(-1.0, min(1.0, cos_zen(L, h)))
    z = math.acos(c)
    if abs(z) >= math.pi / 2:
        return 0.0
    return zen ** (1 / math.cos(z))


def eta_sg(L, h, rr=r):
    return eta_fs(L, rr) * eta_atm(L, h)


def midpoint_L(d, h):
    th = d / (2 * RE)
    return math.sqrt(RE**2 + (RE + h) ** 2 - 2 * RE * (RE + h) * math.cos(th))


print("waist_500km", repr(waist(500e3)))
print("far_field_500km", repr(w0 * 500e3 / LR))
print("eta_fs_500km", repr(eta_fs(500)), -10 * math.log10(eta_fs(500)))
print("eta_sg_zenith_500", repr(eta_sg(500, 500)), -10 * math.log10(eta_sg(500, 500)))
print("eta_tot_zenith_500", repr(eta_sg(500, 500) ** 2), -20 * math.log10(eta_sg(500, 500)))
print("zenith_h1000_L1500", repr(math.acos(cos_zen(1500, 1000))))
print("horizon_range_h1000", repr(math.sqrt(1000**2 + 2 * RE * 1000)))
print("gc_18deg", repr(2 * math.pi * RE * 18 / 360))
th = 0.3
print("law_of_cosines_h500_th0.3", repr(math.sqrt(RE**2 + (RE + 500) ** 2 - 2 * RE * (RE + 500) * math.cos(th))))

# crossover of h=500 vs h=1000 midpoint-zenith transmittance
prev = None
d = 100.0
while d < 4000:
    a = eta_sg(midpoint_L(d, 500), 500) ** 2
    b = eta_sg(midpoint_L(d, 1000), 1000) ** 2
    if b > a:
        print("crossover_km", d)
        break
    d += 1.0
grid = [500, 1000, 1500, 2000, 3000, 3500, 4000, 5000, 6000, 8000, 10000]
vals = [eta_sg(midpoint_L(2000, h), h) ** 2 for h in grid]
print("d2000 argmax h", grid[vals.index(max(vals))], [f"{v:.3e}" for v in vals])

# noise
eta, nb = 1e-3, 1e-5
x = (1 - nb) * eta + nb / 2 * ((1 - 2 * eta) ** 2 + eta**2)
y = nb / 2 * (1 - eta) ** 2
z = (1 - nb) * eta - nb * eta * (1 - 2 * eta)
print("xyz", repr(x), repr(y), repr(z))
fs = 0.99
print("required_snr_0.99", repr(1 / (math.sqrt(3 / (4 * fs - 1)) - 1)), 1.5 / (1 - fs))
print("F_ideal_snr150", repr(0.25 * (1 + 3 / (1 + 1 / 150) ** 2)))
hP, c = 6.62607015e-34, 299792458.0
R = 1.0 * 100e-6 * math.pi * 0.5**2 * (1e-9 * 1e6) / (hP * c / 810e-9)
print("bg_rate", repr(R), "nbar_1ns", R * 1e-9)

# fidelity threshold scan for d=2000 (h from 500..10000) with Fig. 8 filter parameters
for h in [500, 1000, 2000, 5000]:
    e = eta_sg(midpoint_L(2000, h), h)
    snr = 1 / (math.sqrt(3 / (4 * 0.95 - 1)) - 1)
    nmax = e / snr
    print("h", h, "eta_sg", e, "H_max(F>=.95)", nmax / (R * 1e-9))

print("avg loss half", repr(-10 * math.log10(0.5e-6)))
print("horizon chord h500", 2 * RE * math.acos(RE / (RE + 500)))
