"""LSTM encoder-decoder internals: scans, attention, backprop, optimizers.

Layout convention: (T, B, features) inside recurrent scans, batch-major
everywhere else.  The per-timestep loops are numba-compiled when numba is
importable; set STEMMAPLACE_NO_NUMBA=1 to force the plain numpy fallback
(same math, slower).  Training batches group instances of equal source and
target length, so no padding or masking is ever needed.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import DataError


def _lstm_scan_fwd(XP, Wh, h0, c0):
    """Run an LSTM over pre-projected inputs XP[t] = x_t @ Wx + b.

    Returns hidden/cell sequences plus gate activations, which is exactly
    the cache the backward scan needs.
    """
    T, B, G = XP.shape
    h = G // 4
    # dtype-typed constants: bare float literals would promote f32 to f64
    one = XP.dtype.type(1.0)
    hi = XP.dtype.type(60.0)
    lo = XP.dtype.type(-60.0)
    HS = np.empty((T, B, h), XP.dtype)
    CS = np.empty((T, B, h), XP.dtype)
    IG = np.empty((T, B, h), XP.dtype)
    FG = np.empty((T, B, h), XP.dtype)
    OG = np.empty((T, B, h), XP.dtype)
    GG = np.empty((T, B, h), XP.dtype)
    hprev = h0.copy()
    cprev = c0.copy()
    for t in range(T):
        Z = XP[t] + np.dot(hprev, Wh)
        # clip keeps exp() finite under fastmath; sigmoids saturate anyway
        Zs = np.minimum(np.maximum(Z[:, : 3 * h], lo), hi)
        i = one / (one + np.exp(-Zs[:, :h]))
        f = one / (one + np.exp(-Zs[:, h : 2 * h]))
        o = one / (one + np.exp(-Zs[:, 2 * h : 3 * h]))
        g = np.tanh(Z[:, 3 * h :])
        c = f * cprev + i * g
        hh = o * np.tanh(c)
        IG[t] = i
        FG[t] = f
        OG[t] = o
        GG[t] = g
        CS[t] = c
        HS[t] = hh
        hprev = hh
        cprev = c
    return HS, CS, IG, FG, OG, GG


def _lstm_scan_bwd(dHS, dh_fin, dc_fin, WhT, CS, IG, FG, OG, GG, c0):
    """Backward scan matching _lstm_scan_fwd.

    dHS carries per-step gradients into the hidden outputs; dh_fin/dc_fin
    inject extra gradient into the final state (used when a decoder is
    initialized from encoder finals).  Returns the pre-activation gradients
    dZ plus the gradients flowing into h0 and c0.
    """
    T, B, h = dHS.shape
    one = dHS.dtype.type(1.0)
    dZ = np.empty((T, B, 4 * h), dHS.dtype)
    dh = dh_fin.copy()
    dc = dc_fin.copy()
    for t in range(T - 1, -1, -1):
        dht = dh + dHS[t]
        tc = np.tanh(CS[t])
        do = dht * tc
        dct = dc + dht * OG[t] * (one - tc * tc)
        if t > 0:
            cprev = CS[t - 1]
        else:
            cprev = c0
        dZ[t, :, :h] = dct * GG[t] * IG[t] * (one - IG[t])
        dZ[t, :, h : 2 * h] = dct * cprev * FG[t] * (one - FG[t])
        dZ[t, :, 2 * h : 3 * h] = do * OG[t] * (one - OG[t])
        dZ[t, :, 3 * h :] = dct * IG[t] * (one - GG[t] * GG[t])
        dh = np.dot(dZ[t], WhT)
        dc = dct * FG[t]
    return dZ, dh, dc


USING_NUMBA = False
lstm_scan_fwd = _lstm_scan_fwd
lstm_scan_bwd = _lstm_scan_bwd
if os.environ.get("STEMMAPLACE_NO_NUMBA", "0").lower() not in ("1", "true", "yes"):
    try:
        from numba import njit
    except ImportError:
        pass
    else:
        lstm_scan_fwd = njit(cache=True, fastmath=True)(_lstm_scan_fwd)
        lstm_scan_bwd = njit(cache=True, fastmath=True)(_lstm_scan_bwd)
        USING_NUMBA = True


def _sig(x):
    return 1.0 / (1.0 + np.exp(-np.clip(x, -60.0, 60.0)))


def init_params(rng, hp, n_src, n_tgt, dtype=np.float32):
    """Fresh parameter dict; uniform(-0.08, 0.08) weights, +1 forget bias."""
    H = hp.hidden_dim
    h = H // 2
    E = hp.embed_dim
    scale = 0.08

    def mat(*shape):
        return rng.uniform(-scale, scale, size=shape).astype(dtype)

    p = {}
    p["src_emb"] = mat(n_src, E)
    p["tgt_emb"] = mat(n_tgt, E)
    for l in range(hp.layers):
        din = E if l == 0 else H
        for d in ("f", "b"):
            p[f"enc{l}{d}_Wx"] = mat(din, 4 * h)
            p[f"enc{l}{d}_Wh"] = mat(h, 4 * h)
            b = np.zeros(4 * h, dtype=dtype)
            b[h : 2 * h] = 1.0
            p[f"enc{l}{d}_b"] = b
        p[f"dec{l}_Wx"] = mat(E if l == 0 else H, 4 * H)
        p[f"dec{l}_Wh"] = mat(H, 4 * H)
        bd = np.zeros(4 * H, dtype=dtype)
        bd[H : 2 * H] = 1.0
        p[f"dec{l}_b"] = bd
    p["att_Wc"] = mat(2 * H, H)
    p["att_bc"] = np.zeros(H, dtype=dtype)
    p["out_W"] = mat(H, n_tgt)
    p["out_b"] = np.zeros(n_tgt, dtype=dtype)
    return p


def _encode(params, hp, src_ids, drop_rng):
    """Bidirectional encoder over all layers.

    Returns (enc_top (Ts,B,H), per-layer decoder init states, caches).
    """
    B, Ts = src_ids.shape
    if Ts == 0:
        raise DataError("empty source sequence")
    H = hp.hidden_dim
    h = H // 2
    dtype = params["src_emb"].dtype
    keep = 1.0 - hp.dropout

    cur = np.ascontiguousarray(params["src_emb"][src_ids.T])  # (Ts,B,E)
    caches = []
    inits = []
    for l in range(hp.layers):
        din = cur.shape[2]
        flat = cur.reshape(Ts * B, din)
        flat_rev = cur[::-1].reshape(Ts * B, din)
        XPf = (flat @ params[f"enc{l}f_Wx"] + params[f"enc{l}f_b"]).reshape(
            Ts, B, 4 * h
        )
        XPb = (flat_rev @ params[f"enc{l}b_Wx"] + params[f"enc{l}b_b"]).reshape(
            Ts, B, 4 * h
        )
        z = np.zeros((B, h), dtype=dtype)
        fwd = lstm_scan_fwd(XPf, params[f"enc{l}f_Wh"], z, z)
        bwd = lstm_scan_fwd(XPb, params[f"enc{l}b_Wh"], z, z)
        out = np.concatenate([fwd[0], bwd[0][::-1]], axis=2)  # (Ts,B,H)
        inits.append(
            (
                np.concatenate([fwd[0][-1], bwd[0][-1]], axis=1),
                np.concatenate([fwd[1][-1], bwd[1][-1]], axis=1),
            )
        )
        mask = None
        nxt = out
        if l < hp.layers - 1 and drop_rng is not None and hp.dropout > 0.0:
            mask = (drop_rng.random(out.shape) >= hp.dropout).astype(dtype) / keep
            nxt = out * mask
        caches.append((cur, fwd, bwd, mask))
        cur = nxt
    return cur, inits, caches


def _decode_teacher(params, hp, tgt_in, inits, drop_rng):
    """Teacher-forced decoder over all layers; returns (dec_top, caches)."""
    B, Tt = tgt_in.shape
    if Tt == 0:
        raise DataError("empty target sequence")
    H = hp.hidden_dim
    dtype = params["tgt_emb"].dtype
    keep = 1.0 - hp.dropout

    cur = np.ascontiguousarray(params["tgt_emb"][tgt_in.T])  # (Tt,B,E)
    caches = []
    for l in range(hp.layers):
        din = cur.shape[2]
        flat = cur.reshape(Tt * B, din)
        XP = (flat @ params[f"dec{l}_Wx"] + params[f"dec{l}_b"]).reshape(
            Tt, B, 4 * H
        )
        h0, c0 = inits[l]
        scan = lstm_scan_fwd(XP, params[f"dec{l}_Wh"], h0, c0)
        mask = None
        nxt = scan[0]
        if l < hp.layers - 1 and drop_rng is not None and hp.dropout > 0.0:
            mask = (drop_rng.random(nxt.shape) >= hp.dropout).astype(dtype) / keep
            nxt = nxt * mask
        caches.append((cur, scan, mask))
        cur = nxt
    top = caches[-1][1][0]  # top layer hidden sequence, pre-dropout
    return top, caches


def run_batch(params, hp, src_ids, tgt_in, tgt_out, compute_grads=True, drop_rng=None):
    """One teacher-forced pass over an equal-length batch.

    Returns (loss, logits, grads) with logits flattened batch-major
    ((B*Tt, V), matching tgt_out.ravel()); grads is None unless requested.
    """
    B, Ts = src_ids.shape
    Tt = tgt_in.shape[1]
    H = hp.hidden_dim
    h = H // 2
    L = hp.layers

    enc_top, inits, enc_caches = _encode(params, hp, src_ids, drop_rng)
    dec_top, dec_caches = _decode_teacher(params, hp, tgt_in, inits, drop_rng)

    # global dot attention, batch-major
    enc_bth = np.ascontiguousarray(enc_top.transpose(1, 0, 2))  # (B,Ts,H)
    dec_bt = np.ascontiguousarray(dec_top.transpose(1, 0, 2))  # (B,Tt,H)
    scores = dec_bt @ enc_bth.transpose(0, 2, 1)  # (B,Tt,Ts)
    scores -= scores.max(axis=2, keepdims=True)
    ealpha = np.exp(scores)
    alpha = ealpha / ealpha.sum(axis=2, keepdims=True)
    ctx = alpha @ enc_bth  # (B,Tt,H)
    hcat = np.concatenate([ctx, dec_bt], axis=2)  # (B,Tt,2H)
    hflat = hcat.reshape(B * Tt, 2 * H)
    h_att = np.tanh(hflat @ params["att_Wc"] + params["att_bc"])
    logits = h_att @ params["out_W"] + params["out_b"]  # (B*Tt,V)

    rows = np.arange(B * Tt)
    tflat = tgt_out.reshape(B * Tt)
    m = logits.max(axis=1, keepdims=True)
    ex = np.exp(logits - m)
    sumex = ex.sum(axis=1, keepdims=True)
    nll = np.log(sumex[:, 0]) - (logits - m)[rows, tflat]
    loss = float(nll.mean())
    if not compute_grads:
        return loss, logits, None

    grads = {
        "src_emb": np.zeros_like(params["src_emb"]),
        "tgt_emb": np.zeros_like(params["tgt_emb"]),
    }

    P = ex / sumex
    P[rows, tflat] -= 1.0
    dlogits = P / (B * Tt)
    grads["out_W"] = h_att.T @ dlogits
    grads["out_b"] = dlogits.sum(axis=0)
    dh_att = dlogits @ params["out_W"].T
    da = dh_att * (1.0 - h_att * h_att)
    grads["att_Wc"] = hflat.T @ da
    grads["att_bc"] = da.sum(axis=0)
    dhcat = (da @ params["att_Wc"].T).reshape(B, Tt, 2 * H)
    dctx = np.ascontiguousarray(dhcat[:, :, :H])
    ddec_bt = dhcat[:, :, H:].copy()

    dalpha = dctx @ enc_bth.transpose(0, 2, 1)  # (B,Tt,Ts)
    denc_bth = alpha.transpose(0, 2, 1) @ dctx  # (B,Ts,H)
    dscores = alpha * (dalpha - (dalpha * alpha).sum(axis=2, keepdims=True))
    ddec_bt += dscores @ enc_bth
    denc_bth += dscores.transpose(0, 2, 1) @ dec_bt

    dcur = np.ascontiguousarray(ddec_bt.transpose(1, 0, 2))  # (Tt,B,H)
    denc = np.ascontiguousarray(denc_bth.transpose(1, 0, 2))  # (Ts,B,H)

    # decoder layers, top down
    dinits = [None] * L
    for l in range(L - 1, -1, -1):
        cur, (HS, CS, IG, FG, OG, GG), _mask = dec_caches[l]
        h0, c0 = inits[l]
        zfin = np.zeros_like(h0)
        WhT = np.ascontiguousarray(params[f"dec{l}_Wh"].T)
        dZ, dh0, dc0 = lstm_scan_bwd(dcur, zfin, zfin, WhT, CS, IG, FG, OG, GG, c0)
        dinits[l] = (dh0, dc0)
        flatZ = dZ.reshape(Tt * B, 4 * H)
        flatin = cur.reshape(Tt * B, -1)
        grads[f"dec{l}_Wx"] = flatin.T @ flatZ
        hprev = np.concatenate([h0[None], HS[:-1]], axis=0).reshape(Tt * B, H)
        grads[f"dec{l}_Wh"] = hprev.T @ flatZ
        grads[f"dec{l}_b"] = flatZ.sum(axis=0)
        dX = (flatZ @ params[f"dec{l}_Wx"].T).reshape(Tt, B, -1)
        if l > 0:
            below_mask = dec_caches[l - 1][2]
            dcur = dX * below_mask if below_mask is not None else dX
        else:
            np.add.at(grads["tgt_emb"], tgt_in.T.ravel(), dX.reshape(Tt * B, -1))

    # encoder layers, top down
    dcur = denc
    for l in range(L - 1, -1, -1):
        cur, fwd, bwd, _mask = enc_caches[l]
        HSf, CSf, IGf, FGf, OGf, GGf = fwd
        HSb, CSb, IGb, FGb, OGb, GGb = bwd
        dh0, dc0 = dinits[l]
        zB = np.zeros((B, h), dtype=dcur.dtype)
        dHSf = np.ascontiguousarray(dcur[:, :, :h])
        dHSb = np.ascontiguousarray(dcur[::-1, :, h:])
        WhfT = np.ascontiguousarray(params[f"enc{l}f_Wh"].T)
        WhbT = np.ascontiguousarray(params[f"enc{l}b_Wh"].T)
        dZf, _, _ = lstm_scan_bwd(
            dHSf,
            np.ascontiguousarray(dh0[:, :h]),
            np.ascontiguousarray(dc0[:, :h]),
            WhfT, CSf, IGf, FGf, OGf, GGf, zB,
        )
        dZb, _, _ = lstm_scan_bwd(
            dHSb,
            np.ascontiguousarray(dh0[:, h:]),
            np.ascontiguousarray(dc0[:, h:]),
            WhbT, CSb, IGb, FGb, OGb, GGb, zB,
        )
        din = cur.shape[2]
        flatin = cur.reshape(Ts * B, din)
        flatin_rev = cur[::-1].reshape(Ts * B, din)
        flatZf = dZf.reshape(Ts * B, 4 * h)
        flatZb = dZb.reshape(Ts * B, 4 * h)
        grads[f"enc{l}f_Wx"] = flatin.T @ flatZf
        grads[f"enc{l}b_Wx"] = flatin_rev.T @ flatZb
        hprevf = np.concatenate(
            [np.zeros((1, B, h), dtype=dcur.dtype), HSf[:-1]], axis=0
        ).reshape(Ts * B, h)
        hprevb = np.concatenate(
            [np.zeros((1, B, h), dtype=dcur.dtype), HSb[:-1]], axis=0
        ).reshape(Ts * B, h)
        grads[f"enc{l}f_Wh"] = hprevf.T @ flatZf
        grads[f"enc{l}b_Wh"] = hprevb.T @ flatZb
        grads[f"enc{l}f_b"] = flatZf.sum(axis=0)
        grads[f"enc{l}b_b"] = flatZb.sum(axis=0)
        dX = (flatZf @ params[f"enc{l}f_Wx"].T).reshape(Ts, B, din)
        dX += (flatZb @ params[f"enc{l}b_Wx"].T).reshape(Ts, B, din)[::-1]
        if l > 0:
            below_mask = enc_caches[l - 1][3]
            dcur = dX * below_mask if below_mask is not None else dX
        else:
            np.add.at(grads["src_emb"], src_ids.T.ravel(), dX.reshape(Ts * B, -1))

    return loss, logits, grads


def decode_greedy(params, hp, src_ids, bos, eos, banned, max_len):
    """Greedy decode for a batch of equal-length sources.

    Returns one id list per batch row (EOS not included).  `banned` ids are
    masked out of the argmax entirely, so they can never be emitted.
    """
    B = src_ids.shape[0]
    H = hp.hidden_dim
    enc_top, inits, _ = _encode(params, hp, src_ids, None)
    enc_bth = np.ascontiguousarray(enc_top.transpose(1, 0, 2))  # (B,Ts,H)
    hs = [pair[0].copy() for pair in inits]
    cs = [pair[1].copy() for pair in inits]
    cur = np.full(B, bos, dtype=np.int64)
    out = [[] for _ in range(B)]
    alive = np.ones(B, dtype=bool)
    for _ in range(max_len):
        x = params["tgt_emb"][cur]  # (B,E)
        for l in range(hp.layers):
            z = x @ params[f"dec{l}_Wx"] + hs[l] @ params[f"dec{l}_Wh"]
            z += params[f"dec{l}_b"]
            i = _sig(z[:, :H])
            f = _sig(z[:, H : 2 * H])
            o = _sig(z[:, 2 * H : 3 * H])
            g = np.tanh(z[:, 3 * H :])
            cs[l] = f * cs[l] + i * g
            hs[l] = o * np.tanh(cs[l])
            x = hs[l]
        scores = (enc_bth @ x[:, :, None])[:, :, 0]  # (B,Ts)
        scores -= scores.max(axis=1, keepdims=True)
        e = np.exp(scores)
        alpha = e / e.sum(axis=1, keepdims=True)
        ctx = (alpha[:, None, :] @ enc_bth)[:, 0, :]  # (B,H)
        h_att = np.tanh(
            np.concatenate([ctx, x], axis=1) @ params["att_Wc"] + params["att_bc"]
        )
        logits = h_att @ params["out_W"] + params["out_b"]
        for b_id in banned:
            logits[:, b_id] = -np.inf
        tok = logits.argmax(axis=1)
        for b in range(B):
            if alive[b]:
                if tok[b] == eos:
                    alive[b] = False
                else:
                    out[b].append(int(tok[b]))
        if not alive.any():
            break
        cur = tok
    return out


def global_grad_norm(grads):
    total = 0.0
    for k in sorted(grads):
        g = grads[k].ravel().astype(np.float64, copy=False)
        total += float(np.dot(g, g))
    return float(np.sqrt(total))


def clip_gradients(grads, max_norm):
    """Scale all gradients in place so the global norm is <= max_norm."""
    norm = global_grad_norm(grads)
    if norm > max_norm > 0.0:
        scale = max_norm / norm
        for k in grads:
            grads[k] *= scale
    return norm


class Adam:
    """Adam with bias correction; updates parameters in place."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params, grads):
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for k in sorted(params):
            g = grads[k]
            m = self.m[k]
            v = self.v[k]
            m += (1.0 - self.beta1) * (g - m)
            v += (1.0 - self.beta2) * (g * g - v)
            params[k] -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)


class SGD:
    """Plain gradient descent; same interface as Adam."""

    def __init__(self, params, lr=1e-3):
        self.lr = lr

    def step(self, params, grads):
        for k in sorted(params):
            params[k] -= self.lr * grads[k]
