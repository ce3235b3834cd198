import numpy as np

LEAF_SIZE = 8


class BVH:
    """
    Axis-aligned bounding-volume hierarchy over triangles, built by median splits
    along the longest centroid extent. Traversal is vectorised over (ray, node)
    pairs and returns candidate (ray, triangle) pairs; the exact test is left to
    the caller. Boxes are padded so the candidate set is a superset of the hits.
    """

    def __init__(self, triangles, leaf_size=LEAF_SIZE):
        triangles = np.asarray(triangles, dtype=float)
        self.n_triangles = triangles.shape[0]
        self.leaf_size = leaf_size
        lo_tri = triangles.min(axis=1)
        hi_tri = triangles.max(axis=1)
        centroids = triangles.mean(axis=1)
        extent = float(np.max(hi_tri.max(axis=0) - lo_tri.min(axis=0))) if self.n_triangles else 1.0
        self.pad = 1e-9 * max(extent, 1.0)

        order = np.arange(self.n_triangles)
        lo, hi, left, right, start, count = [], [], [], [], [], []

        def new_node(s, e):
            idx = order[s:e]
            lo.append(lo_tri[idx].min(axis=0) - self.pad if e > s else np.zeros(3))
            hi.append(hi_tri[idx].max(axis=0) + self.pad if e > s else np.zeros(3))
            left.append(-1)
            right.append(-1)
            start.append(s)
            count.append(e - s)
            return len(lo) - 1

        root = new_node(0, self.n_triangles)
        stack = [(root, 0, self.n_triangles)]
        while stack:
            node, s, e = stack.pop()
            if e - s <= leaf_size:
                continue
            c = centroids[order[s:e]]
            axis = int(np.argmax(c.max(axis=0) - c.min(axis=0)))
            mid = (s + e) // 2
            # stable split keeps the build deterministic for tied centroids
            local = np.argsort(c[:, axis], kind="stable")
            order[s:e] = order[s:e][local]
            l_node = new_node(s, mid)
            r_node = new_node(mid, e)
            left[node] = l_node
            right[node] = r_node
            count[node] = 0
            stack.append((r_node, mid, e))
            stack.append((l_node, s, mid))

        self.order = order
        self.lo = np.array(lo).reshape(-1, 3)
        self.hi = np.array(hi).reshape(-1, 3)
        self.left = np.array(left, dtype=np.int64)
        self.right = np.array(right, dtype=np.int64)
        self.start = np.array(start, dtype=np.int64)
        self.count = np.array(count, dtype=np.int64)

    @property
    def n_nodes(self):
        return self.lo.shape[0]

    def _slab(self, origins, inv_dirs, nodes, t_max):
        with np.errstate(invalid="ignore", over="ignore"):
            t1 = (self.lo[nodes] - origins) * inv_dirs
            t2 = (self.hi[nodes] - origins) * inv_dirs
        near = np.minimum(t1, t2)
        far = np.maximum(t1, t2)
        nan = np.isnan(near) | np.isnan(far)
        near[nan] = -np.inf
        far[nan] = np.inf
        t_near = near.max(axis=1)
        t_far = far.min(axis=1)
        return (t_near <= t_far) & (t_far >= 0.0) & (t_near <= t_max)

    def candidates(self, origins, directions, t_max=None):
        """
        Output:
            - ray_ids (ndarray), tri_ids (ndarray): candidate pairs, sorted by ray then triangle
        """
        origins = np.asarray(origins, dtype=float)
        directions = np.asarray(directions, dtype=float)
        n_rays = origins.shape[0]
        if self.n_triangles == 0 or n_rays == 0:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        if t_max is None:
            t_max = np.full(n_rays, np.inf)
        t_max = np.broadcast_to(np.asarray(t_max, dtype=float), (n_rays,))
        with np.errstate(divide="ignore"):
            inv = 1.0 / directions

        rays = np.arange(n_rays)
        nodes = np.zeros(n_rays, dtype=np.int64)
        out_rays, out_tris = [], []
        while rays.size:
            hit = self._slab(origins[rays], inv[rays], nodes, t_max[rays])
            rays, nodes = rays[hit], nodes[hit]
            leaf = self.left[nodes] < 0
            if np.any(leaf):
                lr, ln = rays[leaf], nodes[leaf]
                counts = self.count[ln]
                total = int(counts.sum())
                offsets = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
                out_rays.append(np.repeat(lr, counts))
                out_tris.append(self.order[np.repeat(self.start[ln], counts) + offsets])
            inner = ~leaf
            rays = np.concatenate((rays[inner], rays[inner]))
            nodes = np.concatenate((self.left[nodes[inner]], self.right[nodes[inner]]))
        if not out_rays:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        ray_ids = np.concatenate(out_rays)
        tri_ids = np.concatenate(out_tris)
        order = np.lexsort((tri_ids, ray_ids))
        return ray_ids[order], tri_ids[order]
