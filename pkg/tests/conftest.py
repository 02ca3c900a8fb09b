import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

DATA = Path(__file__).parent / "data"

PURCHASES = [
    ("Hair dryer _ Home electronics retailer", "Shinjuku-ku, Tokyo, Japan"),
    ("Refrigerator _ Home electronics retailer", "Asaka-City, Saitama, Japan"),
    ("Clothing _ Department store", "Osaka-shi, Osaka, Japan"),
    ("Cake _ Department store", "Ichikawa-city, Chiba, Japan"),
    ("Cake _ Supermarket", "Oita-city, Oita, Japan"),
    ("Cake _ Department store", "Adachi-ku, Tokyo, Japan"),
    ("Desk _ Supermarket", "Akita-city, Akita, Japan"),
]

CITATIONS = [
    ("Akira, O.2000", "Author, A2013"),
    ("Akira, O.2000", "Author, B2011"),
    ("Akira, O.2000", "Author, C2012"),
    ("Masayoshi, K.1995", "Author, D2012"),
    ("Masayoshi, K.1995", "Akira, O.2000"),
    ("Masayoshi, K.1995", "Author, E2012"),
    ("Author, E2012", "Author, F2012"),
]

TWO_MODE = [
    ("Electrical appliances", "Electrical appliance store"),
    ("Electrical appliances", "Electrical appliance store"),
    ("Dress", "Department store"),
    ("Accessories", "Department store"),
    ("Cake", "Supermarket"),
]

CHECKIN_LINE = (
    '"Tue, 22 Dec 2012",twitter_User_ID,'
    '"I bought the clothes by **department store. (@ **Department store w/7 others)",'
    '"[35.628227, 139.738712]"'
)
CHECKIN_TEXT = "I bought the clothes by **department store. (@ **Department store w/7 others)"


@pytest.fixture
def purchases():
    return list(PURCHASES)


@pytest.fixture
def data_dir():
    return DATA


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, (ok, detail) in ACCEPTANCE.items():
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
