"""Regenerates the bundled CSV datasets under data/.

tic-tac-toe.csv: every legal end-of-game board (x moves first) with the
class "positive" when x has three in a row. Cells are x, o or b (blank).
breast-cancer.csv: the Wisconsin diagnostic data shipped with scikit-learn;
label 1 = benign.
"""
import csv
import os

from sklearn.datasets import load_breast_cancer

LINES = [(0, 1, 2), (3, 4, 5), (6, 7, 8), (0, 3, 6), (1, 4, 7), (2, 5, 8), (0, 4, 8), (2, 4, 6)]
CELLS = ["top-left", "top-middle", "top-right", "middle-left", "middle-middle",
         "middle-right", "bottom-left", "bottom-middle", "bottom-right"]


def winner(board):
    for a, b, c in LINES:
        if board[a] != "b" and board[a] == board[b] == board[c]:
            return board[a]
    return None


def endgames():
    seen = set()
    ordered = []

    def play(board, player):
        if winner(board) or "b" not in board:
            key = tuple(board)
            if key not in seen:
                seen.add(key)
                ordered.append(key)
            return
        for i in range(9):
            if board[i] == "b":
                board[i] = player
                play(board, "o" if player == "x" else "x")
                board[i] = "b"

    play(["b"] * 9, "x")
    return sorted(ordered)


def main():
    out = os.path.join(os.path.dirname(__file__), "..", "data")
    boards = endgames()
    with open(os.path.join(out, "tic-tac-toe.csv"), "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(CELLS + ["class"])
        for b in boards:
            w.writerow(list(b) + ["positive" if winner(list(b)) == "x" else "negative"])

    bc = load_breast_cancer()
    with open(os.path.join(out, "breast-cancer.csv"), "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow([n.replace(" ", "_") for n in bc.feature_names] + ["benign"])
        for row, y in zip(bc.data, bc.target):
            w.writerow([repr(float(v)) for v in row] + [int(y)])


if __name__ == "__main__":
    main()
