"""Writes a 50-line before/after pair and its 3-hunk unified diff (difflib)."""
import difflib
import pathlib

data = pathlib.Path(__file__).resolve().parent.parent / "data"
before = [f"    int v{i} = compute({i});" for i in range(1, 51)]
after = list(before)
after[4] = "    int v5 = compute(5) + 1;"
after[19:21] = ["    int v20 = compute(20);", "    if (v20 < 0) return;", "    int v21 = compute(-21);"]
del after[40]
b = "\n".join(before) + "\n"
a = "\n".join(after) + "\n"
(data / "hunk_before.java").write_text(b)
(data / "hunk_after.java").write_text(a)
diff = difflib.unified_diff(b.splitlines(True), a.splitlines(True), "a/File.java", "b/File.java", n=1)
(data / "hunk.diff").write_text("".join(diff))
