"""Compiled per-vehicle kernels behind :mod:`rampflow.road_world`.

Parameter vectors are packed as float arrays so one compiled kernel serves
every configuration:

* IDM: ``[a_max, b, s0, time_headway, delta]``
* lane change: ``[b_safe, kappa, min_gap, politeness, threshold,
  keep_right_bias, merge_bias, merge_urgency, cooldown, time_gap]``
"""

import math

import numpy as np
from numba import njit

A_MAX = 2.6
B_HARD = 4.5
HUMAN = 3
RAMP_LANE = -1
KEY_STRIDE = 1.0e6
SAFETY_MARGIN = 0.5


@njit(cache=True)
def clip_accel(a):
    return min(max(a, -B_HARD), A_MAX)


@njit(cache=True)
def idm(v, v_lead, gap, free_speed, p):
    free_term = (v / free_speed) ** p[4]
    if not gap < math.inf:
        return clip_accel(p[0] * (1.0 - free_term))
    if gap <= 0.0:
        return -B_HARD
    dynamic = v * p[3] + v * (v - v_lead) / (2.0 * math.sqrt(p[0] * p[1]))
    s_star = p[2] + max(dynamic, 0.0)
    return clip_accel(p[0] * (1.0 - free_term - (s_star / gap) ** 2))


@njit(cache=True)
def acc_gap(gap, headway, v, v_lead, free_speed, k_gap, k_speed, p_safe):
    a = idm(v, v_lead, gap, free_speed, p_safe)
    if gap < math.inf:
        a = min(a, k_gap * (gap - headway) + k_speed * (v_lead - v))
    return clip_accel(a)


@njit(cache=True)
def model_accel(ctrl, headway, v, v_lead, gap, free_speed, p_human, p_safe, k_gap, k_speed):
    if ctrl == HUMAN:
        return idm(v, v_lead, gap, free_speed, p_human)
    return acc_gap(gap, headway, v, v_lead, free_speed, k_gap, k_speed, p_safe)


@njit(cache=True)
def stopping_distance(v, b, dt):
    n = math.floor(v / (b * dt))
    return dt * (n * v - b * dt * n * (n + 1) / 2.0)


@njit(cache=True)
def max_safe_speed(budget, b, dt):
    if budget <= 0.0:
        return 0.0
    n = math.floor((-1.0 + math.sqrt(1.0 + 8.0 * budget / (b * dt * dt))) / 2.0)
    if dt * dt * b * (n + 1) * (n + 2) / 2.0 <= budget:
        n += 1
    return (budget / dt + b * dt * n * (n + 1) / 2.0) / (n + 1)


@njit(cache=True)
def gap_ok(v, lead_gap, lead_speed, follow_gap, follow_speed, follower_after, assertiveness,
           b_safe, kappa, min_gap, time_gap, dt):
    if follower_after < -b_safe * (1.0 + assertiveness * kappa):
        return False
    scale = 1.0 + assertiveness
    if lead_gap < (min_gap + time_gap * v) / scale:
        return False
    if follow_gap < math.inf and follow_gap < (min_gap + time_gap * follow_speed) / scale:
        return False
    if lead_gap < math.inf:
        if stopping_distance(v, B_HARD, dt) > lead_gap - SAFETY_MARGIN + stopping_distance(lead_speed, B_HARD, dt):
            return False
    if follow_gap < math.inf:
        if stopping_distance(follow_speed, B_HARD, dt) > follow_gap - SAFETY_MARGIN + stopping_distance(v, B_HARD, dt):
            return False
    return True


@njit(cache=True)
def incentive(own_now, own_after, nf_now, nf_after, old_now, old_after, bias, politeness):
    return own_after - own_now + politeness * (nf_after - nf_now + old_after - old_now) + bias


@njit(cache=True)
def merge_bias(pos, accel_end, accel_len, base, urgency):
    remaining = min(max(accel_end - pos, 0.0), accel_len)
    return base + urgency * (1.0 - remaining / accel_len)


@njit(cache=True)
def free_speed(lane, pos, vfactor, merge_point, v_main, v_ramp):
    if lane == RAMP_LANE and pos < merge_point:
        return v_ramp * vfactor
    return v_main * vfactor


@njit(cache=True)
def leaders(order, lane, pos, length):
    n = order.size
    lead = np.full(n, -1, dtype=np.int64)
    gap = np.full(n, math.inf)
    for k in range(n - 1):
        i, j = order[k], order[k + 1]
        if lane[i] == lane[j]:
            lead[i] = j
            gap[i] = pos[j] - length[j] - pos[i]
    return lead, gap


@njit(cache=True)
def leaders_with_speed(order, lane, pos, length, speed):
    lead, gap = leaders(order, lane, pos, length)
    v_lead = np.full(order.size, np.nan)
    for i in range(order.size):
        if lead[i] >= 0:
            v_lead[i] = speed[lead[i]]
    return lead, gap, v_lead


@njit(cache=True)
def lane_end_accel(v, end_gap, s0, b_comf):
    """Braking toward the end of the acceleration lane.

    Drivers keep going until stopping at the end would take more than the
    comfortable deceleration, then brake at the rate that stops them there.
    """
    room = end_gap - s0
    if room <= 0.0:
        return -B_HARD
    need = v * v / (2.0 * room)
    if need < b_comf:
        return math.inf
    return -need


@njit(cache=True)
def accelerations(order, lane, pos, speed, length, headway, ctrl, vfactor, forced,
                  merge_point, accel_end, accel_len, v_main, v_ramp, p_human, p_safe, k_gap, k_speed,
                  coop, dt):
    """Bounded accelerations for every vehicle.

    ``coop = [lookahead, urgency_fraction, b_coop]`` describes human drivers
    on lane 0 yielding to a merging vehicle that is running out of lane.
    """
    n = order.size
    lead, gap, v_lead = leaders_with_speed(order, lane, pos, length, speed)
    keys = np.empty(n)
    for k in range(n):
        keys[k] = (lane[order[k]] + 1) * KEY_STRIDE + pos[order[k]]
    acc = np.empty(n)
    for i in range(n):
        fs = free_speed(lane[i], pos[i], vfactor[i], merge_point, v_main, v_ramp)
        if math.isnan(forced[i]):
            a = model_accel(ctrl[i], headway[i], speed[i], v_lead[i], gap[i], fs, p_human, p_safe, k_gap, k_speed)
            if lane[i] == RAMP_LANE:
                a = min(a, lane_end_accel(speed[i], accel_end - pos[i], p_safe[2], p_human[1]))
            elif lane[i] == 0:
                a = min(a, yield_accel(i, order, keys, lane, pos, speed, length, headway, ctrl, fs,
                                       merge_point, accel_end, accel_len, p_human, p_safe, k_gap, k_speed, coop))
        else:
            a = forced[i]
        g, vl = gap[i], v_lead[i]
        if lane[i] == RAMP_LANE and accel_end - pos[i] < g:
            g, vl = accel_end - pos[i], 0.0
        if g < math.inf:
            budget = g - SAFETY_MARGIN + stopping_distance(vl, B_HARD, dt)
            a = min(a, (max_safe_speed(budget, B_HARD, dt) - speed[i]) / dt)
        acc[i] = clip_accel(a)
    return acc


@njit(cache=True)
def yield_accel(i, order, keys, lane, pos, speed, length, headway, ctrl, fs,
                merge_point, accel_end, accel_len, p_human, p_safe, k_gap, k_speed, coop):
    lookahead, urgency_fraction, b_coop = coop[0], coop[1], coop[2]
    n = order.size
    j = np.searchsorted(keys, (RAMP_LANE + 1) * KEY_STRIDE + pos[i], side="right")
    while j < n:
        r = order[j]
        if lane[r] != RAMP_LANE:
            break
        rear_gap = pos[r] - length[r] - pos[i]
        if rear_gap > lookahead:
            break
        if rear_gap > 0.0 and pos[r] - length[r] >= merge_point:
            if accel_end - pos[r] <= urgency_fraction * accel_len:
                a = model_accel(ctrl[i], headway[i], speed[i], speed[r], rear_gap, fs, p_human, p_safe, k_gap, k_speed)
                if a >= -b_coop:
                    return a
            return math.inf
        j += 1
    return math.inf


@njit(cache=True)
def lane_changes(order, keys, lane, pos, speed, length, headway, ctrl, vfactor, assertiveness,
                 last_lc, clock, n_main, merge_point, accel_end, accel_len, v_main, v_ramp,
                 p_human, p_safe, k_gap, k_speed, lcp, dt):
    """Best lane per vehicle under MOBIL; conflicts between changers are resolved by the caller."""
    n = order.size
    lead, gap, v_lead = leaders_with_speed(order, lane, pos, length, speed)
    follow = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        if lead[i] >= 0:
            follow[lead[i]] = i
    own_now = np.empty(n)
    fs = np.empty(n)
    for i in range(n):
        fs[i] = free_speed(lane[i], pos[i], vfactor[i], merge_point, v_main, v_ramp)
        own_now[i] = model_accel(ctrl[i], headway[i], speed[i], v_lead[i], gap[i], fs[i],
                                 p_human, p_safe, k_gap, k_speed)
        if lane[i] == RAMP_LANE:
            own_now[i] = min(own_now[i], lane_end_accel(speed[i], accel_end - pos[i], p_safe[2], p_human[1]))

    b_safe, kappa, min_gap, politeness, threshold = lcp[0], lcp[1], lcp[2], lcp[3], lcp[4]
    keep_right, merge_base, merge_urgency, cooldown, time_gap = lcp[5], lcp[6], lcp[7], lcp[8], lcp[9]

    best_lane = lane.copy()
    best_gain = np.full(n, -math.inf)
    best_nl = np.full(n, -1, dtype=np.int64)
    best_nf = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        cooled = clock - last_lc[i] >= cooldown
        merging = lane[i] == RAMP_LANE and pos[i] - length[i] >= merge_point and pos[i] <= accel_end
        for direction in (1, -1):
            if direction == 1:
                if not (merging or (lane[i] >= 0 and lane[i] < n_main - 1 and cooled)):
                    continue
            else:
                if not (lane[i] > 0 and cooled):
                    continue
            tl = lane[i] + direction
            j = np.searchsorted(keys, (tl + 1) * KEY_STRIDE + pos[i], side="right")
            nl = -1
            nf = -1
            if j < n and lane[order[j]] == tl:
                nl = order[j]
            if j >= 1 and lane[order[j - 1]] == tl:
                nf = order[j - 1]
            v = speed[i]
            nl_gap, nl_speed = math.inf, math.nan
            if nl >= 0:
                nl_gap = pos[nl] - length[nl] - pos[i]
                nl_speed = speed[nl]
            nf_gap, nf_speed, nf_after, nf_now = math.inf, math.nan, 0.0, 0.0
            if nf >= 0:
                nf_gap = pos[i] - length[i] - pos[nf]
                nf_speed = speed[nf]
                # the changer cannot see an ACC setpoint, so it judges the new
                # follower as if it were a human driver
                nf_after = model_accel(HUMAN, headway[nf], nf_speed, v, nf_gap, fs[nf],
                                       p_human, p_safe, k_gap, k_speed)
                if nl >= 0:
                    nf_now = model_accel(HUMAN, headway[nf], nf_speed, nl_speed,
                                         pos[nl] - length[nl] - pos[nf], fs[nf],
                                         p_human, p_safe, k_gap, k_speed)
                else:
                    nf_now = model_accel(HUMAN, headway[nf], nf_speed, math.nan, math.inf, fs[nf],
                                         p_human, p_safe, k_gap, k_speed)
            if not gap_ok(v, nl_gap, nl_speed, nf_gap, nf_speed, nf_after, assertiveness[i],
                          b_safe, kappa, min_gap, time_gap, dt):
                continue
            own_after = model_accel(ctrl[i], headway[i], v, nl_speed, nl_gap, v_main * vfactor[i],
                                    p_human, p_safe, k_gap, k_speed)
            of = follow[i]
            old_now, old_after = 0.0, 0.0
            if of >= 0:
                old_now = own_now[of]
                if lead[i] >= 0:
                    of_gap, of_vl = gap[of] + length[i] + gap[i], v_lead[i]
                else:
                    of_gap, of_vl = math.inf, math.nan
                old_after = model_accel(ctrl[of], headway[of], speed[of], of_vl, of_gap, fs[of],
                                        p_human, p_safe, k_gap, k_speed)
                if lane[of] == RAMP_LANE:
                    old_after = min(old_after, lane_end_accel(speed[of], accel_end - pos[of], p_safe[2], p_human[1]))
            if direction == 1:
                bias = 0.0
                if lane[i] == RAMP_LANE:
                    bias = merge_bias(pos[i], accel_end, accel_len, merge_base, merge_urgency)
            else:
                bias = keep_right
            gain = incentive(own_now[i], own_after, nf_now, nf_after, old_now, old_after, bias, politeness)
            if gain > threshold and gain > best_gain[i]:
                best_gain[i] = gain
                best_lane[i] = tl
                best_nl[i] = nl
                best_nf[i] = nf
    return best_lane, best_gain, best_nl, best_nf
