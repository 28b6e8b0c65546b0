# sntool/reports.py
from io import BytesIO
import datetime

from reportlab.lib import colors
from reportlab.lib.styles import getSampleStyleSheet
from reportlab.platypus import Paragraph, SimpleDocTemplate, Spacer, Table, TableStyle


def _fmt(value):
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def _table(df):
    table = Table([df.columns.tolist()] + [[_fmt(v) for v in row] for row in df.values.tolist()])
    table.setStyle(
        TableStyle([
            ("BACKGROUND", (0, 0), (-1, 0), colors.gray),
            ("TEXTCOLOR", (0, 0), (-1, 0), colors.white),
            ("GRID", (0, 0), (-1, -1), 0.25, colors.black),
            ("FONTSIZE", (0, 0), (-1, -1), 8),
        ])
    )
    return table


def generate_pdf_report_bytes(title, sections, meta=None):
    """
    Render a PDF with a title, optional key/value metadata and a list of
    (heading, DataFrame) sections. Returns the PDF as bytes.
    """
    buffer = BytesIO()
    doc = SimpleDocTemplate(buffer)
    styles = getSampleStyleSheet()
    story = [Paragraph(title, styles["Title"]), Spacer(1, 20)]

    story.append(Paragraph(f"Generated on: {datetime.datetime.now()}", styles["Normal"]))
    story.append(Spacer(1, 20))

    for key, value in (meta or {}).items():
        story.append(Paragraph(f"<b>{key}:</b> {_fmt(value)}", styles["Normal"]))
    if meta:
        story.append(Spacer(1, 20))

    for heading, df in sections:
        story.append(Paragraph(heading, styles["Heading2"]))
        story.append(_table(df))
        story.append(Spacer(1, 20))

    doc.build(story)
    return buffer.getvalue()


def write_pdf_report(path, title, sections, meta=None):
    with open(path, "wb") as fh:
        fh.write(generate_pdf_report_bytes(title, sections, meta))
    return path
