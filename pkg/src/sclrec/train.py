"""Two-stage optimization: contrastive pretraining of the layer-0 embeddings,
then BPR fine-tuning, both driven by a from-scratch Adam."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from sclrec.dataset import BipartiteGraph, build_graph
from sclrec.gcn import (EmbeddingState, ProjectionHead, init_head, propagate,
                        project_backward, project_forward)
from sclrec.loss import ContrastBatch, LossConfig, bpr_loss, info_nce, s_info_nce
from sclrec.metrics import evaluate

logger = logging.getLogger("sclrec.train")


@dataclass
class TrainConfig:
    lr: float = 0.001
    batch_size: int = 1024
    pretrain_epochs: int = 200
    finetune_epochs: int = 400
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    eval_every: int = 10
    patience: int = 50  # epochs without NDCG@10 improvement before stopping
    dtype: str = "float32"

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.pretrain_epochs < 0 or self.finetune_epochs < 0:
            raise ValueError("epoch counts must be >= 0")

    @property
    def np_dtype(self):
        return np.dtype(self.dtype)


class AdamState:
    """First/second moments shaped like each parameter plus a step counter."""

    def __init__(self, params: dict):
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.step = 0

    def copy(self) -> "AdamState":
        out = AdamState({})
        out.m = {k: v.copy() for k, v in self.m.items()}
        out.v = {k: v.copy() for k, v in self.v.items()}
        out.step = self.step
        return out


def adam_step(params: dict, grads: dict, state: AdamState, config: TrainConfig):
    """Standard Adam update with bias correction; params updated in place."""
    state.step += 1
    t = state.step
    b1, b2 = config.adam_beta1, config.adam_beta2
    for name, p in params.items():
        g = grads[name]
        if not np.isfinite(g).all():
            raise FloatingPointError(f"non-finite gradient for parameter {name!r}")
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        p -= config.lr * m_hat / (np.sqrt(v_hat) + config.adam_eps)
    return params, state


def _cast_adj(graph: BipartiteGraph, dtype):
    adj = graph.norm_adj
    return adj if adj.dtype == dtype else adj.astype(dtype)


def _propagate_raw(e0: np.ndarray, adj, L: int) -> np.ndarray:
    acc = e0.copy()
    e = e0
    for _ in range(L):
        e = adj @ e
        acc += e
    return acc / (L + 1)


def _similar_pairs_matrix(neighbors, n: int) -> np.ndarray:
    """Symmetric boolean matrix: (a, b) true if either lists the other in its
    top-N; diagonal true (a node's two views are mutual positives)."""
    mat = np.eye(n, dtype=bool)
    for a, neigh in enumerate(neighbors):
        for b, _score in neigh:
            mat[a, b] = True
            mat[b, a] = True
    return mat


def _expand_view_mask(pair_mat: np.ndarray) -> np.ndarray:
    """Lift an anchor-level pair matrix to the interleaved two-view row space."""
    return np.kron(pair_mat, np.ones((2, 2), dtype=bool))


def contrastive_loss_and_grads(e0: np.ndarray, adj1, adj2, L: int,
                               head: ProjectionHead, nodes: np.ndarray, offset: int,
                               pair_mat: np.ndarray | None, tau: float,
                               objective: str = "s_infonce",
                               denominator: str = "negatives"):
    """One contrastive mini-batch over same-side nodes, end to end.

    Propagates e0 through both view adjacencies, projects the batch rows of
    each view (interleaved), applies the chosen contrastive loss, and chains
    the gradient back to e0 and the head parameters.

    Returns (loss, grad_e0, head_grads); (None, None, None) when the batch has
    an anchor without any valid negative.
    """
    final1 = _propagate_raw(e0, adj1, L)
    final2 = _propagate_raw(e0, adj2, L)
    rows = nodes + offset
    b = len(nodes)
    h = np.empty((2 * b, e0.shape[1]), dtype=e0.dtype)
    h[0::2] = final1[rows]
    h[1::2] = final2[rows]
    z, cache = project_forward(h, head)
    z64 = z.astype(np.float64)
    if (np.linalg.norm(z64, axis=1) == 0).any():
        return None, None, None  # dead-relu row, cosine undefined for this batch
    if objective == "infonce":
        loss, grad_z = info_nce(z64, tau)
    else:
        sub = pair_mat[np.ix_(nodes, nodes)]
        pos = _expand_view_mask(sub)
        np.fill_diagonal(pos, False)
        eye = np.eye(2 * b, dtype=bool)
        neg = ~(pos | eye)
        if not neg.any(axis=1).all():
            return None, None, None
        batch = ContrastBatch(z=z64, positive_mask=pos, valid_negative_mask=neg)
        loss, grad_z = s_info_nce(batch, tau, denominator=denominator)
    grad_h, head_grads = project_backward(cache, head, grad_z.astype(e0.dtype))
    grad_final1 = np.zeros_like(e0)
    grad_final2 = np.zeros_like(e0)
    np.add.at(grad_final1, rows, grad_h[0::2])
    np.add.at(grad_final2, rows, grad_h[1::2])
    grad_e0 = _propagate_raw(grad_final1, adj1, L) + _propagate_raw(grad_final2, adj2, L)
    return loss, grad_e0, head_grads


def pretrain(dataset, sim_index, aug_config, state: EmbeddingState,
             head: ProjectionHead | None, loss_config: LossConfig,
             train_config: TrainConfig, objective: str = "s_infonce",
             log_fn=None):
    """Contrastive pretraining of the layer-0 embeddings and projection head.

    Per epoch: two fresh augmented views; users and items batched separately
    (shuffled); each batch projects both views' propagated embeddings and
    applies the contrastive objective; Adam updates e0 and the head.

    Returns (state, head, loss_curve) with one mean batch loss per epoch.
    """
    from sclrec.augment import make_views

    dtype = train_config.np_dtype
    graph = build_graph(dataset.train, dataset.num_users, dataset.num_items)
    rng = np.random.default_rng(np.random.SeedSequence([train_config.seed, 101]))
    e0 = state.stacked().astype(dtype)
    if head is None:
        head = init_head(state.d, state.d, state.d, train_config.seed, dtype=dtype)
    head = ProjectionHead(head.w1.astype(dtype), head.b1.astype(dtype),
                          head.w2.astype(dtype), head.b2.astype(dtype))
    params = {"emb": e0, "w1": head.w1, "b1": head.b1, "w2": head.w2, "b2": head.b2}
    adam = AdamState(params)
    pair_user = pair_item = None
    if objective != "infonce":
        pair_user = _similar_pairs_matrix(sim_index.user_neighbors, dataset.num_users)
        pair_item = _similar_pairs_matrix(sim_index.item_neighbors, dataset.num_items)
    loss_curve = []
    for epoch in range(1, train_config.pretrain_epochs + 1):
        v1, v2 = make_views(graph, aug_config, sim_index, rng)
        adj1 = _cast_adj(v1.graph, dtype)
        adj2 = _cast_adj(v2.graph, dtype)
        batch_losses = []
        for offset, count, pair_mat in ((0, dataset.num_users, pair_user),
                                        (dataset.num_users, dataset.num_items, pair_item)):
            order = rng.permutation(count)
            for start in range(0, count, train_config.batch_size):
                nodes = order[start:start + train_config.batch_size]
                if len(nodes) < 2:
                    continue
                loss, grad_e0, head_grads = contrastive_loss_and_grads(
                    e0, adj1, adj2, state.L, head, nodes, offset, pair_mat,
                    loss_config.tau, objective=objective,
                    denominator=loss_config.denominator)
                if loss is None:
                    logger.warning("epoch %d: degenerate contrastive batch at "
                                   "offset %d (no valid negatives or zero-norm "
                                   "projection), skipped", epoch, offset)
                    continue
                grads = {"emb": grad_e0.astype(dtype)}
                grads.update({k: v.astype(dtype) for k, v in head_grads.items()})
                adam_step(params, grads, adam, train_config)
                batch_losses.append(loss)
        epoch_loss = float(np.mean(batch_losses)) if batch_losses else float("nan")
        loss_curve.append(epoch_loss)
        line = f"stage=pretrain epoch={epoch} loss={epoch_loss:.6f}"
        (log_fn or logger.info)(line)
    out = EmbeddingState(user_emb=e0[: dataset.num_users].copy(),
                         item_emb=e0[dataset.num_users:].copy(),
                         d=state.d, L=state.L)
    return out, head, loss_curve


def _sample_negatives(users, train_sets, num_items, rng):
    """One uniform non-interacted item per training interaction (rejection)."""
    neg = rng.integers(0, num_items, size=len(users))
    bad = np.fromiter((neg[t] in train_sets[users[t]] for t in range(len(users))),
                      dtype=bool, count=len(users))
    idx = np.flatnonzero(bad)
    while idx.size:
        neg[idx] = rng.integers(0, num_items, size=idx.size)
        still = np.fromiter((neg[t] in train_sets[users[t]] for t in idx),
                            dtype=bool, count=idx.size)
        idx = idx[still]
    return neg


def finetune(dataset, state: EmbeddingState, loss_config: LossConfig,
             train_config: TrainConfig, log_fn=None):
    """BPR fine-tuning on the full training graph; only e0 is updated.

    Early-stops on NDCG@10 (evaluated every eval_every epochs, patience in
    epochs) and returns the best-scoring state plus the metric history as a
    list of (epoch, mean_loss, ndcg10-or-None).
    """
    dtype = train_config.np_dtype
    graph = build_graph(dataset.train, dataset.num_users, dataset.num_items)
    adj = _cast_adj(graph, dtype)
    rng = np.random.default_rng(np.random.SeedSequence([train_config.seed, 202]))
    nu = dataset.num_users
    e0 = state.stacked().astype(dtype)
    params = {"emb": e0}
    adam = AdamState(params)
    train_sets = [set() for _ in range(nu)]
    for u, i in dataset.train:
        train_sets[u].add(i)
    pairs = sorted(dataset.train)
    # a user holding every item admits no negative; drop its triples up front
    pairs = [(u, i) for u, i in pairs if len(train_sets[u]) < dataset.num_items]
    users_all = np.fromiter((u for u, _ in pairs), dtype=np.int64, count=len(pairs))
    items_all = np.fromiter((i for _, i in pairs), dtype=np.int64, count=len(pairs))

    def snapshot():
        return EmbeddingState(user_emb=e0[:nu].copy(), item_emb=e0[nu:].copy(),
                              d=state.d, L=state.L)

    def eval_ndcg(st):
        prop = propagate(st, graph)
        return evaluate(prop.final_user, prop.final_item, dataset).ndcg_at[10]

    history = []
    can_eval = bool(dataset.test)
    best_ndcg = eval_ndcg(snapshot()) if can_eval else None
    best_state = snapshot()
    best_epoch = 0
    history.append((0, None, best_ndcg))
    for epoch in range(1, train_config.finetune_epochs + 1):
        neg_all = _sample_negatives(users_all, train_sets, dataset.num_items, rng)
        order = rng.permutation(len(pairs))
        losses = []
        for start in range(0, len(pairs), train_config.batch_size):
            sel = order[start:start + train_config.batch_size]
            bu, bi, bj = users_all[sel], items_all[sel] + nu, neg_all[sel] + nu
            final = _propagate_raw(e0, adj, state.L)
            fu, fi, fj = final[bu], final[bi], final[bj]
            y_pos = np.einsum("td,td->t", fu, fi)
            y_neg = np.einsum("td,td->t", fu, fj)
            eu, ei, ej = e0[bu], e0[bi], e0[bj]
            sq = float((eu * eu).sum() + (ei * ei).sum() + (ej * ej).sum())
            loss, g_pos, g_neg = bpr_loss(y_pos, y_neg, sq, loss_config.lambda_l2)
            nb = len(sel)
            losses.append(loss / nb)
            g_pos = (g_pos / nb).astype(dtype)
            g_neg = (g_neg / nb).astype(dtype)
            grad_final = np.zeros_like(e0)
            np.add.at(grad_final, bu, g_pos[:, None] * fi + g_neg[:, None] * fj)
            np.add.at(grad_final, bi, g_pos[:, None] * fu)
            np.add.at(grad_final, bj, g_neg[:, None] * fu)
            grad_e0 = _propagate_raw(grad_final, adj, state.L)
            reg = 2.0 * loss_config.lambda_l2 / nb
            np.add.at(grad_e0, bu, reg * eu)
            np.add.at(grad_e0, bi, reg * ei)
            np.add.at(grad_e0, bj, reg * ej)
            adam_step(params, {"emb": grad_e0}, adam, train_config)
        epoch_loss = float(np.mean(losses)) if losses else float("nan")
        ndcg = None
        if can_eval and epoch % train_config.eval_every == 0:
            ndcg = eval_ndcg(snapshot())
            if best_ndcg is None or ndcg > best_ndcg:
                best_ndcg, best_state, best_epoch = ndcg, snapshot(), epoch
        history.append((epoch, epoch_loss, ndcg))
        line = f"stage=finetune epoch={epoch} loss={epoch_loss:.6f}"
        if ndcg is not None:
            line += f" ndcg10={ndcg:.6f}"
        (log_fn or logger.info)(line)
        if can_eval and epoch - best_epoch >= train_config.patience:
            break
    if not can_eval or train_config.finetune_epochs == 0:
        best_state = snapshot()
    return best_state, history
