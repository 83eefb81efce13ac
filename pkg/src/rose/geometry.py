"""Grid geometry: headings, unit vectors, rotations.

Cells are (row, col) integer pairs. Row grows southward, col grows eastward.
"""

NORTH, EAST, SOUTH, WEST = 0, 1, 2, 3

HEADING_NAMES = ("north", "east", "south", "west")
HEADING_BY_NAME = {name: h for h, name in enumerate(HEADING_NAMES)}

# Unit step for each heading, indexed by the constants above.
DIR_VEC = ((-1, 0), (0, 1), (1, 0), (0, -1))

HEADING_CHARS = {"^": NORTH, ">": EAST, "v": SOUTH, "<": WEST}
CHAR_BY_HEADING = {h: c for c, h in HEADING_CHARS.items()}


def step_cell(cell, heading, k=1):
    dr, dc = DIR_VEC[heading]
    return (cell[0] + dr * k, cell[1] + dc * k)


def right_of(heading):
    return (heading + 1) % 4


def left_of(heading):
    return (heading - 1) % 4


def opposite(heading):
    return (heading + 2) % 4


def axis_of(heading):
    """0 for vertical travel (north/south), 1 for horizontal (east/west)."""
    return heading % 2


def projection(cell, heading):
    """Scalar coordinate that strictly increases along the travel direction."""
    r, c = cell
    if heading == EAST:
        return c
    if heading == WEST:
        return -c
    if heading == SOUTH:
        return r
    return -r


def rotate_offset(offset, heading):
    """Rotate an east-frame (row, col) offset into the given heading's frame."""
    r, c = offset
    if heading == EAST:
        return (r, c)
    if heading == WEST:
        return (-r, -c)
    if heading == SOUTH:
        return (c, -r)
    return (-c, r)  # NORTH
