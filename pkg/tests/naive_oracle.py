"""Independent triple-loop evaluation of the evolution equations.

Every coefficient C^i_{hk} and T^i_{[hk]}(x) is built entry by entry from
the defining formulas with their index provisos written out literally; no
banding, no contraction, no shared code with the package.
"""


def payment_probabilities(r):
    n = len(r)
    rn = r[n - 1]
    p = [[min(r[h], r[k]) / (4 * rn) for k in range(n)] for h in range(n)]
    for j in range(1, n - 1):
        p[j][j] = r[j] / (2 * rn)
    for h in range(1, n):
        p[h][0] = r[0] / (2 * rn)
    for k in range(0, n - 1):
        p[n - 1][k] = r[k] / (2 * rn)
    for k in range(n):
        p[0][k] = 0.0
    for h in range(n):
        p[h][n - 1] = 0.0
    return p


def coefficient_C(i, h, k, p, tau, theta, r, S):
    """C^i_{hk} with 0-based indices; n-1 is the top class."""
    n = len(r)

    def pay(j):
        return S * (1 - (tau[j] + theta[j]) / 2)

    if h == i + 1:
        if i <= n - 2 and k <= n - 2:
            return p[i + 1][k] * pay(k) / (r[i + 1] - r[i])
        return 0.0
    if h == i:
        c = 1.0
        if i <= n - 2 and k >= 1:
            c -= p[k][i] * pay(i) / (r[i + 1] - r[i])
        if i >= 1 and k <= n - 2:
            c -= p[i][k] * pay(k) / (r[i] - r[i - 1])
        return c
    if h == i - 1:
        if i >= 1 and k >= 1:
            return p[k][i - 1] * pay(i - 1) / (r[i] - r[i - 1])
        return 0.0
    return 0.0


def coefficient_T(i, h, k, x, p, theta, r, S):
    n = len(r)
    if h == 0:
        return 0.0
    total = sum(x)
    below_top = sum(x[: n - 1])
    first = 0.0
    if i - 1 >= 0:
        first += x[i - 1] / (r[i] - r[i - 1])
    if i + 1 <= n - 1:
        first -= x[i] / (r[i + 1] - r[i])
    second = 0.0
    if i + 1 <= n - 1 and h == i + 1:
        second += 1.0 / (r[h] - r[i])
    if i - 1 >= 0 and h == i:
        second -= 1.0 / (r[h] - r[i - 1])
    amount = p[h][k] * S * theta[k]
    return amount / total * first + amount * second * below_top / total


def naive_rhs(x, r, S, tau_min, tau_max, q):
    n = len(r)
    tau = [tau_min + j / (n - 1) * (tau_max - tau_min) for j in range(n)]
    theta = [(1 - q) * t for t in tau]
    p = payment_probabilities(r)
    out = []
    for i in range(n):
        acc = 0.0
        for h in range(n):
            for k in range(n):
                acc += (coefficient_C(i, h, k, p, tau, theta, r, S)
                        + coefficient_T(i, h, k, x, p, theta, r, S)) * x[h] * x[k]
        acc -= x[i] * sum(x)
        out.append(acc)
    return out
