"""High-precision oracles for the zero-bias and Wasserstein composite bounds.

Evaluates the defining displays directly in mpmath (quadrature for every
integral, exact enumeration for binomial moments) at a handful of fixed
settings, so the float64 implementation (log-space tricks, closed-form
integral chains) can be regression-tested against an independent route.

    python tests/oracles/compute_bound_oracles.py
"""

import mpmath as mp

mp.mp.dps = 40


def phi(x):
    return mp.ncdf(mp.mpf(x))


def phi_c(x):
    return mp.ncdf(-mp.mpf(x))


def rsig(R, sigma):
    R, sigma = mp.mpf(R), mp.mpf(sigma)
    return R / 2 + mp.sqrt(R**2 - 4 * sigma**2) / 2


# ----------------------------- zero-bias route -----------------------------

def h_u(w, u):
    w, u = mp.mpf(w), mp.mpf(u)
    return (w + (1 + w**2) * mp.sqrt(2 * mp.pi) * mp.exp(w**2 / 2) * phi(w)) * phi_c(u)


def b_growth(w):
    w = mp.mpf(w)
    s = w + mp.sqrt(w**2 + 8 / mp.pi)
    return 2 / s - 8 * w / (mp.pi * s**2)


def delta_prime(u):
    return h_u(u, u) - b_growth(u) * phi(u)


def q_n(n, R, sigma, u_arg):
    n, R, sigma, u_arg = mp.mpf(n), mp.mpf(R), mp.mpf(sigma), mp.mpf(u_arg)
    rs = rsig(R, sigma)
    delta_n = rs / (4 * mp.sqrt(n))
    v_up2 = sigma**2 + (rs**2 - 6 * sigma**2) / (9 * n)
    v_low2 = sigma**2 * (1 - mp.mpf(89) / (144 * n))
    sig_beta = mp.sqrt(55) * sigma / 12
    beta_n = min(rs / 4, rsig(R, sig_beta) - rs) * (sigma**2 / (3 * n) + rs**2 / (9 * n))
    d = max(u_arg - delta_n, mp.mpf(0))
    b1 = mp.exp(-2 * d**2 / R**2)
    b2 = mp.exp(-(d**2) / (2 * (v_up2 + rs * d / (3 * mp.sqrt(n)))))
    # third branch uses the unclamped gap (u_arg - delta_n), per the display
    b3 = phi_c((u_arg - delta_n) / mp.sqrt(v_low2)) + mp.mpf("0.56") / mp.sqrt(n) * (rs * v_up2 + beta_n) / mp.sqrt(v_low2) ** 3
    return min(b1, b2, b3, mp.mpf(1))


def zero_bias_tail(n, R, sigma, u, lam):
    """Bound on P(S_n > sigma*u + R/sqrt(n)) from the main display."""
    n, R, sigma, u, lam = mp.mpf(n), mp.mpf(R), mp.mpf(sigma), mp.mpf(u), mp.mpf(lam)
    dp = delta_prime(u)
    bracket = h_u(lam * u, u) - dp * phi_c(u) + (h_u(u, u) - h_u(lam * u, u)) * q_n(n, R, sigma, lam * sigma * u)
    return phi_c(u) + R / (sigma * mp.sqrt(n) + R * dp) * bracket


def alt_zero_bias_tail(n, R, sigma, u, lam):
    """Bound on P(S_n > sigma*u*sqrt(n+1)/sqrt(n) + rsig/sqrt(n)), alternative display."""
    n, R, sigma, u, lam = mp.mpf(n), mp.mpf(R), mp.mpf(sigma), mp.mpf(u), mp.mpf(lam)
    dp = delta_prime(u)
    q_arg = lam * sigma * u * mp.sqrt(n) / mp.sqrt(n + 1)
    bracket = h_u(lam * u, u) - dp * phi_c(u) + (h_u(u, u) - h_u(lam * u, u)) * q_n(n + 1, R, sigma, q_arg)
    return phi_c(u) + R / (sigma * mp.sqrt(n + 1) + R * dp) * bracket


# ---------------------------- Wasserstein route ----------------------------

def normal_pnorm(p):
    p = mp.mpf(p)
    return mp.sqrt(2) * (mp.gamma((p + 1) / 2) / mp.sqrt(mp.pi)) ** (1 / p)


def binomial_pnorm(n, q, p):
    n = int(n)
    q, p = mp.mpf(q), mp.mpf(p)
    if q <= 0:
        return mp.mpf(0)
    total = mp.mpf(0)
    for k in range(n + 1):
        pmf = mp.binomial(n, k) * q**k * (1 - q) ** (n - k)
        total += pmf * mp.mpf(k) ** p
    return total ** (1 / p)


def hermite_bound(k, p):
    return mp.sqrt(mp.factorial(k)) * mp.sqrt(mp.mpf(p) - 1) ** k


def wass_constants(n, R, sigma, p):
    n = int(n)
    R, sigma, p = mp.mpf(R), mp.mpf(sigma), mp.mpf(p)
    tR = R / sigma
    trs = rsig(R, sigma) / sigma
    a_p = mp.sqrt(mp.e) * mp.sqrt(p + 2) * (2 * mp.e) ** (1 / p) / mp.sqrt(2)
    a_star = (p + 2) * mp.mpf(n) ** (1 / p) / (2 * mp.sqrt(n))
    a_tilde = a_star * tR ** (-2 / p)
    u_np = a_p + tR * a_tilde
    u_tilde = mp.sqrt(2) * a_p + 2 ** (1 / p) * tR * a_tilde
    zp = normal_pnorm(p)
    # C_{n,p}
    c1 = a_tilde * tR * 2 ** (1 / p) + mp.sqrt(2) * a_p
    c2 = zp * 2 ** (1 / p) * tR ** (1 - 2 / p)
    cands = [c1, c2]
    if p >= 4:
        cands.append(zp * tR / mp.sqrt(n) * mp.sqrt(binomial_pnorm(n, 2 / tR**2, p / 2)))
    c_np = min(cands)
    # D_{n,p}
    x = trs**2 - 1
    mx = max(x ** (1 - 1 / p), ((x**p + x) / trs**2) ** (1 / p)) if x > 0 else mp.mpf(0)
    d_cands = [mp.sqrt(p - 1) * mx, mx * a_star + mp.sqrt(x) * a_p,
               mp.sqrt(2) * (mp.gamma((p + 1) / 2) / mp.sqrt(mp.pi)) ** (1 / p) * trs ** (2 * (1 - 2 / p)) * x ** (1 / p) if x > 0 else mp.mpf(0)]
    if p >= 4:
        d_cands.append(mp.sqrt(2) * 2 ** (-1 / p) * (mp.gamma((p + 1) / 2) / mp.sqrt(mp.pi)) ** (1 / p)
                       * tR**2 / mp.sqrt(n) * mp.sqrt(binomial_pnorm(n, 2 * x / trs**4, p / 2)))
    d_np = min(d_cands) / (2 * mp.sqrt(n))
    b_pn = min(tR**2 / n * binomial_pnorm(n, 2 / tR**2, p), 1 + u_tilde * tR / mp.sqrt(n))
    return dict(tR=tR, trs=trs, a_p=a_p, a_star=a_star, a_tilde=a_tilde, u_np=u_np,
                u_tilde=u_tilde, c_np=c_np, d_np=d_np, b_pn=b_pn, zp=zp)


def omega_kappa(n, R, sigma, p, kappa, K_p, loose=False):
    """omega_p^{R,kappa} (or the loose variant) by direct quadrature."""
    n_i = int(n)
    n, R, sigma, p, kappa = mp.mpf(n), mp.mpf(R), mp.mpf(sigma), mp.mpf(p), mp.mpf(kappa)
    c = wass_constants(n_i, R, sigma, p)
    tR, zp, c_np, d_np, b_pn, u_tilde = c["tR"], c["zp"], c["c_np"], c["d_np"], c["b_pn"], c["u_tilde"]
    eps = tR**2 / (n * kappa)
    M = mp.sqrt(1 - eps)
    lead = zp * (mp.pi / 2 - mp.asin(M))
    b21 = zp * d_np * M**2
    e193 = mp.exp(mp.mpf(19) / 300)
    pi14 = mp.pi ** mp.mpf("0.25")

    def G(m):
        # integral_{tR^2/kappa}^{n} y^(-1/2) (1/y - 1/n)^m dy
        f = lambda y: y ** mp.mpf("-0.5") * (1 / y - 1 / n) ** m
        return mp.quad(f, [tR**2 / kappa, n])

    if loose:
        z = (p - 1) * kappa * (1 - eps) / 2
        b3 = (tR * (1 + tR * u_tilde / mp.sqrt(n)) / mp.sqrt(n * kappa)
              * pi14 * e193 * mp.sqrt(p - 1) / (4 * mp.sqrt(3)) * (mp.exp(z) - 1))
        b3 += (c_np * tR**2 / (3 * n * kappa) * e193 * pi14 * (mp.exp(z) - 1)
               * mp.log((1 + M) / (1 - M)))
    else:
        K_p = int(K_p)
        # B block
        b_sum = mp.mpf(0)
        for k in range(1, K_p):
            coeff = (hermite_bound(2 * k + 1, p) / mp.factorial(2 * k + 2)
                     - 2 ** mp.mpf(-k) * e193 * pi14 * mp.mpf(K_p) ** mp.mpf("0.25")
                     * mp.sqrt(p - 1) ** (2 * k + 1)
                     / (2 * (K_p + 1) * mp.sqrt(2 * K_p + 1) * mp.factorial(k)))
            b_sum += tR ** (2 * k) / mp.sqrt(n) * coeff * G(k)
        f_exp_b = lambda y: y ** mp.mpf("-0.5") * (mp.exp((p - 1) * tR**2 * (1 / y - 1 / n) / 2) - 1)
        i_exp_b = mp.quad(f_exp_b, [tR**2 / kappa, n])
        b3 = b_pn / 2 * b_sum
        b3 += (b_pn / 4 * e193 * pi14 * mp.mpf(K_p) ** mp.mpf("0.25") * mp.sqrt(p - 1)
               / ((K_p + 1) * mp.sqrt(2 * K_p + 1)) / mp.sqrt(n) * i_exp_b)
        # C block
        c_sum = mp.mpf(0)
        for k in range(1, K_p):
            coeff = (hermite_bound(2 * k, p) / mp.factorial(2 * k + 1)
                     - mp.mpf(K_p) ** mp.mpf("0.25") * 2 ** mp.mpf(-k) * (p - 1) ** k * e193 * pi14
                     / ((2 * K_p + 1) * mp.factorial(k)))
            c_sum += tR ** (2 * k) / n * coeff * G(k - mp.mpf("0.5"))
        f_exp_c = lambda y: (y ** mp.mpf("-1.5") / mp.sqrt(y - 1 / n)
                             * (mp.exp((p - 1) * tR**2 * (y - 1 / n) / 2) - 1))
        i_exp_c = mp.quad(f_exp_c, [1 / n, kappa / tR**2])
        b3 += c_np / 2 * (c_sum + e193 * pi14 * mp.mpf(K_p) ** mp.mpf("0.25") / ((2 * K_p + 1) * n) * i_exp_c)
        b21_or_b22 = b21

    if loose:
        b22 = (mp.sqrt(p - 1) / (2 * mp.sqrt(n))
               * (max(c["trs"] ** 2 - 1, 1) ** (1 - 1 / p) * c["a_star"]
                  + mp.sqrt(max(c["trs"] ** 2 - 1, mp.mpf(0))) * c["a_p"]))
        mid = b22
    else:
        mid = b21
    total = lead + mid + b3
    if p > 2:
        total = total / M
    return total


def main():
    print("# zero-bias oracle values")
    for (n, R, sigma, u, lam) in [(100, 1, "0.25", 2, "0.5"), (100, 1, "0.25", 2, 1),
                                  (1000, 1, "0.1", 3, "0.75"), (50, 1, "0.5", 0, "0.5")]:
        v = zero_bias_tail(n, R, sigma, u, lam)
        a = alt_zero_bias_tail(n, R, sigma, u, lam)
        print(f"zero_bias_tail(n={n},R={R},sig={sigma},u={u},lam={lam})  = {mp.nstr(v, 17)}")
        print(f"alt_zero_bias_tail(same)                        = {mp.nstr(a, 17)}")
    for (n, R, sigma, ua) in [(100, 1, "0.25", "0.5"), (100, 1, "0.25", "0.01"), (400, 1, "0.1", "0.3")]:
        print(f"q_n(n={n},R={R},sig={sigma},u_arg={ua})                 = {mp.nstr(q_n(n, R, sigma, ua), 17)}")

    print("# wasserstein constants, n=100 R=1 sigma=0.25 p=4")
    c = wass_constants(100, 1, "0.25", 4)
    for k in ("a_p", "a_star", "a_tilde", "u_np", "u_tilde", "c_np", "d_np", "b_pn"):
        print(f"{k:8s} = {mp.nstr(c[k], 17)}")

    print("# omega_kappa oracle values (tight, loose)")
    for (n, R, sigma, p, kappa, Kp) in [
        (100, 1, "0.25", 2, 2, 3),
        (100, 1, "0.25", 4, 3, 5),
        (100, 1, "0.25", 4, 3, 1),
        (1000, 1, "0.4", 8, "1.5", 10),
        (100, 1, "0.45", 3, "0.9", 4),
        (10000, 1, "0.1", 16, 40, 12),
    ]:
        t = omega_kappa(n, R, sigma, p, kappa, Kp, loose=False)
        l = omega_kappa(n, R, sigma, p, kappa, Kp, loose=True)
        print(f"omega_kappa(n={n},sig={sigma},p={p},kappa={kappa},Kp={Kp}) tight = {mp.nstr(t, 17)}  loose = {mp.nstr(l, 17)}")


if __name__ == "__main__":
    main()
