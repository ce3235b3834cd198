"""Readers and writers for STL (binary/ASCII), OBJ and legacy ASCII VTK."""
import logging
import os

import numpy as np

from heart_cohorts.errors import ParseError, UnsupportedElement
from heart_cohorts.geometry.mesh import (HEX, TET, WELD_TOLERANCE, SurfaceMesh, VolumeMesh,
                                         weld_map, weld_vertices)

logger = logging.getLogger(__name__)

# VTK cell types
VTK_TRIANGLE = 5
VTK_TETRA = 10
VTK_HEXAHEDRON = 12
VTK_CELL_TYPE = {TET: VTK_TETRA, HEX: VTK_HEXAHEDRON}

FORMATS = ("stl", "obj", "vtk-polydata", "vtk-unstructured")
_EXTENSIONS = {".stl": "stl", ".obj": "obj", ".vtk": "vtk"}

_STL_RECORD = np.dtype([("normal", "<f4", (3,)), ("vertices", "<f4", (3, 3)), ("attr", "<u2")])


def _fmt_float(x):
    return format(float(x), ".9g")


def _resolve_format(path, fmt):
    if fmt is not None:
        if fmt not in FORMATS and fmt != "vtk":
            raise ValueError("Unknown mesh format %r, expected one of %s" % (fmt, FORMATS))
        return fmt
    ext = os.path.splitext(path)[1].lower()
    if ext not in _EXTENSIONS:
        raise ValueError("Cannot infer mesh format from %r" % path)
    return _EXTENSIONS[ext]


def load_mesh(path, fmt=None, weld_tol=WELD_TOLERANCE):
    """
    Loads a surface or volume mesh, welding vertices closer than `weld_tol` mm.
    Args:
        - path (str): mesh file
        - fmt (str): stl | obj | vtk-polydata | vtk-unstructured; inferred from the extension when None
    Output:
        - mesh (SurfaceMesh or VolumeMesh)
    """
    fmt = _resolve_format(path, fmt)
    if fmt == "stl":
        vertices, faces = _read_stl(path)
        return _weld_surface(vertices, faces, {}, {}, weld_tol)
    if fmt == "obj":
        vertices, faces = _read_obj(path)
        return _weld_surface(vertices, faces, {}, {}, weld_tol)
    return _read_vtk(path, weld_tol)


def save_mesh(mesh, path, fmt=None, binary=False):
    fmt = _resolve_format(path, fmt)
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    if isinstance(mesh, VolumeMesh):
        if fmt not in ("vtk", "vtk-unstructured"):
            raise UnsupportedElement("Volume meshes can only be written as VTK unstructured grids")
        _write_vtk_unstructured(mesh, path)
        return
    if fmt == "stl":
        _write_stl(mesh, path, binary=binary)
    elif fmt == "obj":
        _write_obj(mesh, path)
    elif fmt == "vtk-unstructured":
        _write_vtk_unstructured(mesh, path)
    else:
        _write_vtk_polydata(mesh, path)
    logger.debug("wrote %s to %s", mesh, path)


def _weld_surface(vertices, faces, vertex_fields, face_fields, tol):
    new_vertices, new_faces, kept, face_keep = weld_vertices(vertices, faces, tol)
    n_dropped = vertices.shape[0] - new_vertices.shape[0]
    if n_dropped:
        logger.debug("welded %d duplicate vertices", n_dropped)
    vertex_fields = {k: np.asarray(v)[kept] for k, v in vertex_fields.items()}
    face_fields = {k: np.asarray(v)[face_keep] for k, v in face_fields.items()}
    return SurfaceMesh(new_vertices, new_faces, vertex_fields, face_fields)


def _weld_volume(nodes, elements, kind, node_fields, element_fields, tol):
    if nodes.shape[0]:
        kept, old_to_new = weld_map(nodes, tol)
        if kept.size != nodes.shape[0]:
            logger.debug("welded %d duplicate nodes", nodes.shape[0] - kept.size)
            nodes = nodes[kept]
            elements = old_to_new[elements]
            node_fields = {k: np.asarray(v)[kept] for k, v in node_fields.items()}
    return VolumeMesh(nodes, elements, kind, node_fields, element_fields)


# STL ---------------------------------------------------------------------------------------------

def _read_stl(path):
    with open(path, "rb") as f:
        data = f.read()
    if _looks_ascii_stl(data):
        return _read_stl_ascii(data.decode("ascii", errors="replace"), path)
    return _read_stl_binary(data, path)


def _looks_ascii_stl(data):
    if not data[:5].lower() == b"solid":
        return False
    if len(data) >= 84:
        n = int(np.frombuffer(data[80:84], dtype="<u4")[0])
        if 84 + 50 * n == len(data):
            return False
    return b"facet" in data[:4096] or len(data) < 84


def _read_stl_binary(data, path):
    if len(data) < 84:
        raise ParseError("binary STL header truncated", path=path, offset=len(data))
    n = int(np.frombuffer(data[80:84], dtype="<u4")[0])
    expected = 84 + 50 * n
    if len(data) < expected:
        complete = (len(data) - 84) // 50
        raise ParseError("truncated facet record %d of %d" % (complete, n), path=path,
                         offset=84 + 50 * complete)
    if len(data) > expected:
        logger.warning("%s: %d trailing bytes after %d facets ignored", path, len(data) - expected, n)
    records = np.frombuffer(data[84:expected], dtype=_STL_RECORD, count=n)
    vertices = records["vertices"].reshape(-1, 3).astype(np.float64)
    faces = np.arange(3 * n, dtype=np.int64).reshape(-1, 3)
    return vertices, faces


def _read_stl_ascii(text, path):
    vertices = []
    state = "solid"
    facet_vertices = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        tokens = raw.split()
        if not tokens:
            continue
        key = tokens[0].lower()
        if key == "solid" and state == "solid":
            state = "body"
        elif key == "facet" and state == "body":
            state = "facet"
            facet_vertices = 0
        elif key == "outer" and state == "facet":
            state = "loop"
        elif key == "vertex" and state == "loop":
            if len(tokens) != 4:
                raise ParseError("vertex record needs 3 coordinates", path=path, line=lineno)
            try:
                vertices.append([float(t) for t in tokens[1:]])
            except ValueError:
                raise ParseError("invalid vertex coordinate", path=path, line=lineno)
            facet_vertices += 1
        elif key == "endloop" and state == "loop":
            if facet_vertices != 3:
                raise UnsupportedElement("%s line %d: facet with %d vertices" % (path, lineno, facet_vertices))
            state = "endloop"
        elif key == "endfacet" and state == "endloop":
            state = "body"
        elif key == "endsolid" and state == "body":
            state = "done"
        else:
            raise ParseError("unexpected %r record" % tokens[0], path=path, line=lineno)
    if state not in ("done", "body"):
        raise ParseError("unterminated solid", path=path, line=len(text.splitlines()))
    vertices = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
    faces = np.arange(vertices.shape[0], dtype=np.int64).reshape(-1, 3)
    return vertices, faces


def _write_stl(mesh, path, binary=False):
    tri = mesh.vertices[mesh.faces]
    normals = mesh.face_normals
    if binary:
        records = np.zeros(mesh.n_faces, dtype=_STL_RECORD)
        records["normal"] = normals
        records["vertices"] = tri
        with open(path, "wb") as f:
            f.write(b"binary STL".ljust(80, b" "))
            f.write(np.array([mesh.n_faces], dtype="<u4").tobytes())
            f.write(records.tobytes())
        return
    with open(path, "w", newline="\n") as f:
        f.write("solid mesh\n")
        for n, t in zip(normals, tri):
            f.write("facet normal %s\n" % " ".join(_fmt_float(x) for x in n))
            f.write("outer loop\n")
            for v in t:
                f.write("vertex %s\n" % " ".join(_fmt_float(x) for x in v))
            f.write("endloop\nendfacet\n")
        f.write("endsolid mesh\n")


# OBJ ---------------------------------------------------------------------------------------------

def _read_obj(path):
    vertices, faces = [], []
    with open(path, "r") as f:
        for lineno, raw in enumerate(f, start=1):
            tokens = raw.split()
            if not tokens or tokens[0].startswith("#"):
                continue
            if tokens[0] == "v":
                if len(tokens) < 4:
                    raise ParseError("vertex record needs 3 coordinates", path=path, line=lineno)
                try:
                    vertices.append([float(t) for t in tokens[1:4]])
                except ValueError:
                    raise ParseError("invalid vertex coordinate", path=path, line=lineno)
            elif tokens[0] == "f":
                if len(tokens) != 4:
                    raise UnsupportedElement("%s line %d: %d-gon faces are not supported"
                                             % (path, lineno, len(tokens) - 1))
                face = []
                for t in tokens[1:]:
                    try:
                        idx = int(t.split("/")[0])
                    except ValueError:
                        raise ParseError("invalid face index %r" % t, path=path, line=lineno)
                    face.append(idx - 1 if idx > 0 else len(vertices) + idx)
                faces.append(face)
    vertices = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
    faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    if faces.size and (faces.min() < 0 or faces.max() >= vertices.shape[0]):
        raise ParseError("face index out of range", path=path)
    return vertices, faces


def _write_obj(mesh, path):
    with open(path, "w", newline="\n") as f:
        for v in mesh.vertices:
            f.write("v %s\n" % " ".join(_fmt_float(x) for x in v))
        for face in mesh.faces:
            f.write("f %d %d %d\n" % tuple(face + 1))


# VTK legacy ASCII --------------------------------------------------------------------------------

class _Tokens:
    """Whitespace tokens of a text file together with their line numbers."""

    def __init__(self, text, path):
        self.path = path
        self.tokens = []
        self.lines = []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            for tok in raw.split():
                self.tokens.append(tok)
                self.lines.append(lineno)
        self.pos = 0

    def at_end(self):
        return self.pos >= len(self.tokens)

    def line(self):
        if self.at_end():
            return self.lines[-1] if self.lines else 0
        return self.lines[self.pos]

    def next(self):
        if self.at_end():
            raise ParseError("unexpected end of file", path=self.path, line=self.line())
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def peek(self):
        return None if self.at_end() else self.tokens[self.pos]

    def next_int(self):
        line = self.line()
        tok = self.next()
        try:
            return int(tok)
        except ValueError:
            raise ParseError("expected integer, got %r" % tok, path=self.path, line=line)

    def take(self, count, dtype):
        if self.pos + count > len(self.tokens):
            raise ParseError("expected %d values, file ends early" % count, path=self.path, line=self.line())
        line = self.line()
        chunk = self.tokens[self.pos:self.pos + count]
        self.pos += count
        try:
            return np.array(chunk, dtype=np.float64).astype(dtype)
        except ValueError:
            raise ParseError("non-numeric value in data block", path=self.path, line=line)


def _read_vtk(path, weld_tol):
    with open(path, "r") as f:
        text = f.read()
    lines = text.splitlines()
    if len(lines) < 4 or not lines[0].startswith("# vtk DataFile Version"):
        raise ParseError("missing '# vtk DataFile Version' header", path=path, line=1)
    if lines[2].strip().upper() != "ASCII":
        raise ParseError("only ASCII legacy VTK files are supported", path=path, line=3)
    toks = _Tokens("\n".join([""] * 3 + lines[3:]), path)

    if toks.next().upper() != "DATASET":
        raise ParseError("expected DATASET", path=path, line=4)
    dataset = toks.next().upper()
    if dataset not in ("POLYDATA", "UNSTRUCTURED_GRID"):
        raise UnsupportedElement("%s: unsupported dataset %s" % (path, dataset))

    points = None
    cells = None
    cell_types = None
    point_data, cell_data = {}, {}
    current = None
    while not toks.at_end():
        line = toks.line()
        key = toks.next().upper()
        if key == "POINTS":
            n = toks.next_int()
            toks.next()
            points = toks.take(3 * n, np.float64).reshape(n, 3)
        elif key in ("POLYGONS", "CELLS"):
            n = toks.next_int()
            size = toks.next_int()
            flat = toks.take(size, np.int64)
            cells = _split_cells(flat, n, path, line)
        elif key == "CELL_TYPES":
            n = toks.next_int()
            cell_types = toks.take(n, np.int64)
        elif key in ("VERTICES", "LINES", "TRIANGLE_STRIPS"):
            raise UnsupportedElement("%s line %d: %s cells are not supported" % (path, line, key))
        elif key == "POINT_DATA":
            current = (point_data, toks.next_int())
        elif key == "CELL_DATA":
            current = (cell_data, toks.next_int())
        elif key in ("SCALARS", "VECTORS", "FIELD"):
            if current is None:
                raise ParseError("%s block outside POINT_DATA/CELL_DATA" % key, path=path, line=line)
            _read_data_block(toks, key, current[0], current[1], line)
        else:
            raise ParseError("unknown keyword %r" % key, path=path, line=line)

    if points is None or cells is None:
        raise ParseError("missing POINTS or cell block", path=path)

    sizes = {len(c) for c in cells}
    if dataset == "POLYDATA" or (cell_types is not None and np.all(cell_types == VTK_TRIANGLE)):
        if sizes - {3}:
            raise UnsupportedElement("%s: non-triangle surface cells" % path)
        faces = np.asarray(cells, dtype=np.int64).reshape(-1, 3)
        return _weld_surface(points, faces, point_data, cell_data, weld_tol)

    if cell_types is None:
        raise ParseError("UNSTRUCTURED_GRID without CELL_TYPES", path=path)
    kinds = set(cell_types.tolist())
    if kinds == {VTK_TETRA} and sizes == {4}:
        kind = TET
    elif kinds == {VTK_HEXAHEDRON} and sizes == {8}:
        kind = HEX
    else:
        raise UnsupportedElement("%s: cell types %s (only homogeneous 10=tet or 12=hex)" % (path, sorted(kinds)))
    elements = np.asarray(cells, dtype=np.int64)
    return _weld_volume(points, elements, kind, point_data, cell_data, weld_tol)


def _split_cells(flat, n, path, line):
    cells = []
    i = 0
    for _ in range(n):
        if i >= flat.size:
            raise ParseError("cell block shorter than declared", path=path, line=line)
        k = int(flat[i])
        cells.append(flat[i + 1:i + 1 + k].tolist())
        i += k + 1
    if i != flat.size:
        raise ParseError("cell block size mismatch", path=path, line=line)
    return cells


def _read_data_block(toks, key, target, n, line):
    if key == "SCALARS":
        name = toks.next()
        dtype = toks.next().lower()
        ncomp = 1
        if toks.peek() is not None and toks.peek().isdigit():
            ncomp = toks.next_int()
        if toks.peek() == "LOOKUP_TABLE":
            toks.next()
            toks.next()
        values = toks.take(n * ncomp, _numpy_type(dtype))
        target[name] = values if ncomp == 1 else values.reshape(n, ncomp)
    elif key == "VECTORS":
        name = toks.next()
        dtype = toks.next().lower()
        target[name] = toks.take(3 * n, _numpy_type(dtype)).reshape(n, 3)
    else:
        toks.next()
        n_arrays = toks.next_int()
        for _ in range(n_arrays):
            name = toks.next()
            ncomp = toks.next_int()
            ntuples = toks.next_int()
            dtype = toks.next().lower()
            if ntuples != n:
                raise ParseError("FIELD array %r has %d tuples, expected %d" % (name, ntuples, n),
                                 path=toks.path, line=line)
            values = toks.take(ncomp * ntuples, _numpy_type(dtype))
            target[name] = values if ncomp == 1 else values.reshape(ntuples, ncomp)


def _numpy_type(vtk_type):
    if vtk_type in ("int", "long", "short", "char", "unsigned_int", "unsigned_char",
                    "unsigned_short", "unsigned_long", "vtkidtype"):
        return np.int64
    return np.float64


def _vtk_type(values):
    return "int" if np.issubdtype(values.dtype, np.integer) or values.dtype == bool else "double"


def _format_values(values):
    if np.issubdtype(values.dtype, np.integer) or values.dtype == bool:
        return ["%d" % v for v in values.astype(np.int64).ravel()]
    return [_fmt_float(v) for v in values.ravel()]


def _write_data(f, header, fields, n):
    if not fields:
        return
    f.write("%s %d\n" % (header, n))
    for name in sorted(fields):
        values = np.asarray(fields[name])
        if values.ndim == 2 and values.shape[1] == 3:
            f.write("VECTORS %s %s\n" % (name, _vtk_type(values)))
            rows = values
        else:
            ncomp = 1 if values.ndim == 1 else values.shape[1]
            f.write("SCALARS %s %s %d\nLOOKUP_TABLE default\n" % (name, _vtk_type(values), ncomp))
            rows = values.reshape(n, ncomp)
        for row in rows:
            f.write(" ".join(_format_values(np.atleast_1d(row))) + "\n")


def _write_points(f, points):
    f.write("POINTS %d double\n" % points.shape[0])
    for p in points:
        f.write("%s %s %s\n" % (_fmt_float(p[0]), _fmt_float(p[1]), _fmt_float(p[2])))


def _write_vtk_polydata(mesh, path):
    with open(path, "w", newline="\n") as f:
        f.write("# vtk DataFile Version 3.0\nheart_cohorts surface\nASCII\nDATASET POLYDATA\n")
        _write_points(f, mesh.vertices)
        f.write("POLYGONS %d %d\n" % (mesh.n_faces, 4 * mesh.n_faces))
        for face in mesh.faces:
            f.write("3 %d %d %d\n" % tuple(face))
        _write_data(f, "CELL_DATA", mesh.face_fields, mesh.n_faces)
        _write_data(f, "POINT_DATA", mesh.vertex_fields, mesh.n_vertices)


def _write_vtk_unstructured(mesh, path):
    if isinstance(mesh, SurfaceMesh):
        points, cells, cell_type = mesh.vertices, mesh.faces, VTK_TRIANGLE
        point_fields, cell_fields = mesh.vertex_fields, mesh.face_fields
    else:
        points, cells, cell_type = mesh.nodes, mesh.elements, VTK_CELL_TYPE[mesh.kind]
        point_fields, cell_fields = mesh.node_fields, mesh.element_fields
    n_cells, arity = cells.shape
    with open(path, "w", newline="\n") as f:
        f.write("# vtk DataFile Version 3.0\nheart_cohorts volume\nASCII\nDATASET UNSTRUCTURED_GRID\n")
        _write_points(f, points)
        f.write("CELLS %d %d\n" % (n_cells, (arity + 1) * n_cells))
        for cell in cells:
            f.write("%d %s\n" % (arity, " ".join("%d" % c for c in cell)))
        f.write("CELL_TYPES %d\n" % n_cells)
        for _ in range(n_cells):
            f.write("%d\n" % cell_type)
        _write_data(f, "CELL_DATA", cell_fields, n_cells)
        _write_data(f, "POINT_DATA", point_fields, points.shape[0])
