"""Hot kernels for the fixed-rate closed-loop simulation.

Everything here is written in the numba-nopython subset (explicit loops,
preallocated float64 arrays, no python objects), and the whole module is
compiled with @njit unless the RCMTELEOP_NO_NUMBA=1 env flag, or a missing
numba, selects the identical plain-python path.  benchmarks/bench_kernels.py
compares the two.

The per-tick math mirrors the reference implementations in ``spatial`` and
``controller`` step for step; tests pin the two paths against each other.
"""

import os

import numpy as np

NUMBA_ENABLED = os.environ.get("RCMTELEOP_NO_NUMBA", "0") != "1"
if NUMBA_ENABLED:
    try:
        from numba import njit
    except ImportError:
        NUMBA_ENABLED = False

if NUMBA_ENABLED:
    _jit = njit(cache=True)
else:

    def _jit(func):
        return func


ORTHONORMALITY_TOL = 1e-9

# sim status codes
OK = 0
DEGENERATE_ARM = 1


@_jit
def mat33_mul(a, b):
    out = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            out[i, j] = a[i, 0] * b[0, j] + a[i, 1] * b[1, j] + a[i, 2] * b[2, j]
    return out


@_jit
def mat33_tmul(a, b):
    """a.T @ b without forming the transpose."""
    out = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            out[i, j] = a[0, i] * b[0, j] + a[1, i] * b[1, j] + a[2, i] * b[2, j]
    return out


@_jit
def mat33_vec(a, v):
    out = np.empty(3)
    for i in range(3):
        out[i] = a[i, 0] * v[0] + a[i, 1] * v[1] + a[i, 2] * v[2]
    return out


@_jit
def mat33_tvec(a, v):
    """a.T @ v."""
    out = np.empty(3)
    for i in range(3):
        out[i] = a[0, i] * v[0] + a[1, i] * v[1] + a[2, i] * v[2]
    return out


@_jit
def cross3(a, b):
    out = np.empty(3)
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]
    return out


@_jit
def norm3(v):
    return np.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])


@_jit
def rot_exp3(w):
    """Rodrigues rotation exponential of an axis-times-angle vector."""
    theta = norm3(w)
    out = np.empty((3, 3))
    if theta < 1e-12:
        out[0, 0] = 1.0
        out[0, 1] = -w[2]
        out[0, 2] = w[1]
        out[1, 0] = w[2]
        out[1, 1] = 1.0
        out[1, 2] = -w[0]
        out[2, 0] = -w[1]
        out[2, 1] = w[0]
        out[2, 2] = 1.0
        return out
    kx = w[0] / theta
    ky = w[1] / theta
    kz = w[2] / theta
    c = np.cos(theta)
    s = np.sin(theta)
    v = 1.0 - c
    out[0, 0] = c + kx * kx * v
    out[0, 1] = kx * ky * v - kz * s
    out[0, 2] = kx * kz * v + ky * s
    out[1, 0] = ky * kx * v + kz * s
    out[1, 1] = c + ky * ky * v
    out[1, 2] = ky * kz * v - kx * s
    out[2, 0] = kz * kx * v - ky * s
    out[2, 1] = kz * ky * v + kx * s
    out[2, 2] = c + kz * kz * v
    return out


@_jit
def orthonormality_residual3(r):
    worst = 0.0
    for i in range(3):
        for j in range(3):
            g = (
                r[0, i] * r[0, j]
                + r[1, i] * r[1, j]
                + r[2, i] * r[2, j]
            )
            if i == j:
                g -= 1.0
            if abs(g) > worst:
                worst = abs(g)
    return worst


@_jit
def gram_schmidt3(r):
    """Column-wise re-orthonormalization keeping the x-axis direction."""
    out = np.empty((3, 3))
    n0 = np.sqrt(r[0, 0] ** 2 + r[1, 0] ** 2 + r[2, 0] ** 2)
    for i in range(3):
        out[i, 0] = r[i, 0] / n0
    d = out[0, 0] * r[0, 1] + out[1, 0] * r[1, 1] + out[2, 0] * r[2, 1]
    c1x = r[0, 1] - d * out[0, 0]
    c1y = r[1, 1] - d * out[1, 0]
    c1z = r[2, 1] - d * out[2, 0]
    n1 = np.sqrt(c1x * c1x + c1y * c1y + c1z * c1z)
    out[0, 1] = c1x / n1
    out[1, 1] = c1y / n1
    out[2, 1] = c1z / n1
    out[0, 2] = out[1, 0] * out[2, 1] - out[2, 0] * out[1, 1]
    out[1, 2] = out[2, 0] * out[0, 1] - out[0, 0] * out[2, 1]
    out[2, 2] = out[0, 0] * out[1, 1] - out[1, 0] * out[0, 1]
    return out


@_jit
def shaft_clearance(p_tip, xhat, shaft_length, ch_point, ch_dir, radius, mouth):
    """Channel radius minus the worst radial deviation of the inserted shaft.

    The channel is the tube of given radius around the axis line, occupying
    axial stations >= mouth (measured along ch_dir from ch_point).  The
    radial deviation along the straight shaft segment is convex, so its
    maximum over the inserted portion sits at one of the portion's ends.
    Returns the full radius when no part of the shaft is inside.
    """
    bx = p_tip[0] - shaft_length * xhat[0]
    by = p_tip[1] - shaft_length * xhat[1]
    bz = p_tip[2] - shaft_length * xhat[2]
    s_base = (
        (bx - ch_point[0]) * ch_dir[0]
        + (by - ch_point[1]) * ch_dir[1]
        + (bz - ch_point[2]) * ch_dir[2]
    )
    s_tip = (
        (p_tip[0] - ch_point[0]) * ch_dir[0]
        + (p_tip[1] - ch_point[1]) * ch_dir[1]
        + (p_tip[2] - ch_point[2]) * ch_dir[2]
    )
    lo = 0.0
    hi = 1.0
    ds = s_tip - s_base
    if s_base < mouth and s_tip < mouth:
        return radius
    if abs(ds) > 0.0:
        tau = (mouth - s_base) / ds
        if ds > 0.0:
            if tau > lo:
                lo = tau
        else:
            if tau < hi:
                hi = tau
    if lo > 1.0 or hi < 0.0 or lo > hi:
        return radius
    worst = 0.0
    for which in range(2):
        tau = lo if which == 0 else hi
        qx = bx + tau * shaft_length * xhat[0]
        qy = by + tau * shaft_length * xhat[1]
        qz = bz + tau * shaft_length * xhat[2]
        wx = qx - ch_point[0]
        wy = qy - ch_point[1]
        wz = qz - ch_point[2]
        ax = wx * ch_dir[0] + wy * ch_dir[1] + wz * ch_dir[2]
        lx = wx - ax * ch_dir[0]
        ly = wy - ax * ch_dir[1]
        lz = wz - ax * ch_dir[2]
        dev = np.sqrt(lx * lx + ly * ly + lz * lz)
        if dev > worst:
            worst = dev
    return radius - worst


@_jit
def line_point_distance(p_tip, xhat, point):
    """Distance from a world point to the (infinite) shaft line."""
    rx = point[0] - p_tip[0]
    ry = point[1] - p_tip[1]
    rz = point[2] - p_tip[2]
    ax = rx * xhat[0] + ry * xhat[1] + rz * xhat[2]
    lx = rx - ax * xhat[0]
    ly = ry - ax * xhat[1]
    lz = rz - ax * xhat[2]
    return np.sqrt(lx * lx + ly * ly + lz * lz)


@_jit
def controller_tick(
    r_we,
    p_we,
    pin,
    v_in,
    w_in,
    r_et,
    t_et,
    r_in_c,
    alpha_t,
    alpha_r,
    gain_k,
    v_max,
    omega_max,
    min_arm,
):
    """One controller evaluation: operator twist -> end-effector twist.

    Returns (v_ee, w_ee, status).  Mirrors controller.step with the
    application frame placed at the pinned pivot's axial station on the
    current shaft.
    """
    r_wf = mat33_mul(r_we, r_et)
    p_f = p_we + mat33_vec(r_we, t_et)

    v_c_in = alpha_t * mat33_vec(r_in_c, v_in)
    w_c_in = alpha_r * mat33_vec(r_in_c, w_in)

    # pivot station in tip coordinates: x component is minus the live arm
    d = mat33_tvec(r_wf, pin - p_f)
    arm = -d[0]
    if arm < min_arm:
        return np.zeros(3), np.zeros(3), DEGENERATE_ARM

    station = np.empty(3)
    station[0] = d[0]
    station[1] = 0.0
    station[2] = 0.0
    p_c = p_f + mat33_vec(r_wf, station)
    r_wc = r_wf.copy()

    r_cf = mat33_tmul(r_wc, r_wf)
    v_f = mat33_tvec(r_cf, v_c_in)
    w_f = np.empty(3)
    w_f[0] = w_c_in[0]
    w_f[1] = -v_f[2] / arm
    w_f[2] = v_f[1] / arm
    w_c = mat33_vec(r_cf, w_f)

    t_f_c = mat33_tvec(r_wf, p_c - p_f)
    delta = d - t_f_c
    v_corr = np.empty(3)
    v_corr[0] = v_f[0]
    v_corr[1] = gain_k * delta[1]
    v_corr[2] = gain_k * delta[2]
    v_c = mat33_vec(r_cf, v_corr)

    scale = 1.0
    nv = norm3(v_c)
    if nv > 0.0 and v_max / nv < scale:
        scale = v_max / nv
    nw = norm3(w_c)
    if nw > 0.0 and omega_max / nw < scale:
        scale = omega_max / nw
    if scale < 1.0:
        for i in range(3):
            v_c[i] *= scale
            w_c[i] *= scale

    r_ec = mat33_tmul(r_we, r_wc)
    t_ec = mat33_tvec(r_we, p_c - p_we)
    w_ee = mat33_vec(r_ec, w_c)
    v_ee = mat33_vec(r_ec, v_c) + cross3(t_ec, w_ee)
    return v_ee, w_ee, OK


@_jit
def sim_tick(
    r_we,
    p_we,
    pin,
    v_in,
    w_in,
    enabled,
    jaw,
    jaw_cmd,
    dt,
    r_et,
    t_et,
    r_in_c,
    alpha_t,
    alpha_r,
    gain_k,
    v_max,
    omega_max,
    min_arm,
    jaw_max,
    jaw_rate,
    ch_point,
    ch_dir,
    ch_radius,
    ch_mouth,
    shaft_length,
):
    """One full closed-loop tick on the pre-update state.

    Controller, safety gate, first-order pose integration (rotation via the
    exact exponential, re-orthonormalized when drift exceeds the tolerance),
    jaw slew, then post-update telemetry fields.  Returns
    (r_new, p_new, jaw_new, tip, drift, clearance, cmd6, gated6, status).
    """
    cmd = np.zeros(6)
    gated = np.zeros(6)
    v_ee, w_ee, status = controller_tick(
        r_we,
        p_we,
        pin,
        v_in,
        w_in,
        r_et,
        t_et,
        r_in_c,
        alpha_t,
        alpha_r,
        gain_k,
        v_max,
        omega_max,
        min_arm,
    )
    if status != OK:
        return r_we, p_we, jaw, p_we, 0.0, 0.0, cmd, gated, status
    for j in range(3):
        cmd[j] = v_ee[j]
        cmd[3 + j] = w_ee[j]
    if enabled:
        for j in range(6):
            gated[j] = cmd[j]
    else:
        for j in range(3):
            v_ee[j] = 0.0
            w_ee[j] = 0.0

    p_new = p_we + mat33_vec(r_we, v_ee * dt)
    r_new = mat33_mul(r_we, rot_exp3(w_ee * dt))
    if orthonormality_residual3(r_new) > ORTHONORMALITY_TOL:
        r_new = gram_schmidt3(r_new)

    target = jaw_cmd * jaw_max
    step = target - jaw
    limit = jaw_rate * dt
    if step > limit:
        step = limit
    elif step < -limit:
        step = -limit
    jaw_new = jaw + step

    r_wf = mat33_mul(r_new, r_et)
    tip = p_new + mat33_vec(r_new, t_et)
    xhat = np.empty(3)
    for j in range(3):
        xhat[j] = r_wf[j, 0]
    drift = line_point_distance(tip, xhat, pin)
    clearance = shaft_clearance(
        tip, xhat, shaft_length, ch_point, ch_dir, ch_radius, ch_mouth
    )
    return r_new, p_new, jaw_new, tip, drift, clearance, cmd, gated, OK


@_jit
def sim_run(
    r0,
    p0,
    pin,
    jaw0,
    v_in,
    w_in,
    enabled,
    jaw_cmd,
    dt,
    r_et,
    t_et,
    r_in_c,
    alpha_t,
    alpha_r,
    gain_k,
    v_max,
    omega_max,
    min_arm,
    jaw_max,
    jaw_rate,
    ch_point,
    ch_dir,
    ch_radius,
    ch_mouth,
    shaft_length,
    r_out,
    p_out,
    tip_out,
    drift_out,
    jaw_out,
    clear_out,
    cmd_out,
    gated_out,
):
    """Fixed-rate closed-loop run over preallocated output arrays.

    Returns -1 on success or the offending tick index on degenerate
    geometry.
    """
    n = v_in.shape[0]
    r_we = r0.copy()
    p_we = p0.copy()
    jaw = jaw0
    for i in range(n):
        r_we, p_we, jaw, tip, drift, clearance, cmd, gated, status = sim_tick(
            r_we,
            p_we,
            pin,
            v_in[i],
            w_in[i],
            enabled[i],
            jaw,
            jaw_cmd[i],
            dt,
            r_et,
            t_et,
            r_in_c,
            alpha_t,
            alpha_r,
            gain_k,
            v_max,
            omega_max,
            min_arm,
            jaw_max,
            jaw_rate,
            ch_point,
            ch_dir,
            ch_radius,
            ch_mouth,
            shaft_length,
        )
        if status != OK:
            return i
        for j in range(3):
            tip_out[i, j] = tip[j]
            p_out[i, j] = p_we[j]
            for kk in range(3):
                r_out[i, j, kk] = r_we[j, kk]
        for j in range(6):
            cmd_out[i, j] = cmd[j]
            gated_out[i, j] = gated[j]
        drift_out[i] = drift
        jaw_out[i] = jaw
        clear_out[i] = clearance
    return -1
