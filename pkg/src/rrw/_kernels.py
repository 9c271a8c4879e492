"""Jit-compiled inner loops: a stack-machine evaluator for compiled
expression programs and the resumable walk stepper.

The walk kernel consumes uniforms from a caller-provided buffer and
returns a status code:

    0  buffer exhausted (refill and call again)
    1  stop criterion fired
    2  step cap reached
    3  position reached the edge of the site arrays (grow and resume)

All mutable state lives in caller-owned arrays so a run can be resumed
across calls with fresh uniform chunks.
"""

import numpy as np
from numba import njit

CLAMP_LO = 1e-12

# istate slots
I_POS = 0
I_NSTEPS = 1
I_U = 2
I_XPLUS = 3
I_TOUCHED = 4
I_LEVEL = 5
I_MAXPOS = 6
I_MINPOS = 7
I_LASTZERO = 8
I_CONSUMED = 9
ISTATE_LEN = 10

# fstate slots
F_DPLUS = 0
F_CLAMPS = 1
FSTATE_LEN = 2

MODE_HORIZON = 0
MODE_HIT_LEVEL = 1
MODE_HIT_EITHER = 2


@njit(cache=True)
def eval_program(stack, codes, args, x):
    sp = 0
    for i in range(codes.shape[0]):
        c = codes[i]
        if c == 0:  # CONST
            stack[sp] = args[i]
            sp += 1
        elif c == 1:  # X
            stack[sp] = x
            sp += 1
        elif c == 2:
            sp -= 1
            stack[sp - 1] = stack[sp - 1] + stack[sp]
        elif c == 3:
            sp -= 1
            stack[sp - 1] = stack[sp - 1] - stack[sp]
        elif c == 4:
            sp -= 1
            stack[sp - 1] = stack[sp - 1] * stack[sp]
        elif c == 5:
            sp -= 1
            stack[sp - 1] = stack[sp - 1] / stack[sp]
        elif c == 6:
            stack[sp - 1] = -stack[sp - 1]
        elif c == 7:
            stack[sp - 1] = stack[sp - 1] ** np.int64(args[i])
        elif c == 8:
            sp -= 1
            stack[sp - 1] = min(stack[sp - 1], stack[sp])
        elif c == 9:
            sp -= 1
            stack[sp - 1] = max(stack[sp - 1], stack[sp])
        else:
            stack[sp - 1] = abs(stack[sp - 1])
    return stack[0]


@njit(cache=True)
def walk_kernel(codes, args,
                r00, l00, r0p, l0p, r0m, l0m,
                visits, rights, touched,
                istate, fstate,
                uniforms,
                mode, target, cap,
                levels, level_T, level_U, level_D,
                path, record_path):
    S = visits.shape[0]
    K = S // 2
    pos = istate[I_POS]
    nsteps = istate[I_NSTEPS]
    U = istate[I_U]
    xplus = istate[I_XPLUS]
    tc = istate[I_TOUCHED]
    lvl = istate[I_LEVEL]
    maxp = istate[I_MAXPOS]
    minp = istate[I_MINPOS]
    lastz = istate[I_LASTZERO]
    dplus = fstate[F_DPLUS]
    clamps = fstate[F_CLAMPS]
    stack = np.empty(64)
    nu = uniforms.shape[0]
    nlevels = levels.shape[0]
    ui = 0
    status = 0

    while True:
        if mode == MODE_HORIZON and nsteps >= target:
            status = 1
            break
        if mode == MODE_HIT_LEVEL and pos == target:
            status = 1
            break
        if mode == MODE_HIT_EITHER and (pos == target or pos == -target):
            status = 1
            break
        if nsteps >= cap:
            status = 2
            break
        idx = pos + K
        if idx <= 0 or idx >= S - 1:
            status = 3
            break
        if ui >= nu:
            status = 0
            break

        v = visits[idx]
        r = rights[idx]
        if pos == 0:
            alpha = (r00 + r) / (l00 + v)
        elif pos > 0:
            alpha = (r0p + r) / (l0p + v)
        else:
            alpha = (r0m + r) / (l0m + v)
        fv = eval_program(stack, codes, args, alpha)
        if not (fv >= CLAMP_LO):  # also catches nan
            fv = CLAMP_LO
            clamps += 1.0
        elif fv > 1.0:
            fv = 1.0
            clamps += 1.0

        u = uniforms[ui]
        ui += 1
        right = u < fv

        if v == 0:
            touched[tc] = idx
            tc += 1
        visits[idx] = v + 1
        if right:
            rights[idx] = r + 1
        if pos >= 0:
            dplus += 2.0 * fv - 1.0
            if right:
                xplus += 1
            else:
                xplus -= 1
        if pos == 0 and not right:
            U += 1

        if right:
            pos += 1
        else:
            pos -= 1
        nsteps += 1
        if record_path:
            path[nsteps] = pos
        if pos > maxp:
            maxp = pos
        if pos < minp:
            minp = pos
        if pos == 0:
            lastz = nsteps
        if lvl < nlevels and pos == levels[lvl]:
            level_T[lvl] = nsteps
            level_U[lvl] = U
            level_D[lvl] = dplus
            lvl += 1

    istate[I_POS] = pos
    istate[I_NSTEPS] = nsteps
    istate[I_U] = U
    istate[I_XPLUS] = xplus
    istate[I_TOUCHED] = tc
    istate[I_LEVEL] = lvl
    istate[I_MAXPOS] = maxp
    istate[I_MINPOS] = minp
    istate[I_LASTZERO] = lastz
    istate[I_CONSUMED] = ui
    fstate[F_DPLUS] = dplus
    fstate[F_CLAMPS] = clamps
    return status
