import httpx
import pytest

from conftest import Reply
from leadwatch.errors import PermanentFetchError, RetryableFetchError, UnsupportedContentError
from leadwatch.fetch import FetchPolicy, HostThrottle, fetch_article, make_client
from leadwatch.retry import Backoff, call_with_retry

PAGE = "<html><head><title>Story</title></head><body><p>" + "word " * 60 + "</p></body></html>"


class Sleeps(list):
    def __call__(self, seconds):
        self.append(seconds)


def test_ok(server):
    server.routes["/a"] = Reply.html(PAGE)
    doc = fetch_article(server.url("/a?utm_source=x"), FetchPolicy())
    assert doc.http_status == 200
    assert doc.title == "Story"
    assert doc.word_count == 60
    assert not doc.is_thin(50)
    assert doc.url == server.url("/a")
    assert doc.redirects == 0 and not doc.truncated


def test_404_is_permanent_and_not_retried(server):
    sleeps = Sleeps()
    with pytest.raises(PermanentFetchError) as info:
        fetch_article(server.url("/missing"), FetchPolicy(), sleep=sleeps)
    assert info.value.status == 404
    assert server.hits("/missing") == 1 and sleeps == []


def test_redirect_chain_recorded(server):
    server.routes["/r1"] = Reply(302, "", {"Location": "/r2"})
    server.routes["/r2"] = Reply(301, "", {"Location": "/r3"})
    server.routes["/r3"] = Reply(307, "", {"Location": "/final"})
    server.routes["/final"] = Reply.html(PAGE)
    policy = FetchPolicy(max_redirects=5)
    with make_client(policy) as client:
        doc = fetch_article(server.url("/r1"), policy, client=client)
    assert doc.final_url == server.url("/final")
    assert doc.redirects == 3


def test_too_many_redirects(server):
    server.routes["/loop"] = Reply(302, "", {"Location": "/loop"})
    policy = FetchPolicy(max_redirects=2)
    with make_client(policy) as client, pytest.raises(PermanentFetchError):
        fetch_article(server.url("/loop"), policy, client=client)


def test_5xx_retried_with_backoff(server):
    server.routes["/flaky"] = [Reply(503, "busy"), Reply(502, "busy"), Reply.html(PAGE)]
    sleeps = Sleeps()
    doc = fetch_article(server.url("/flaky"), FetchPolicy(), sleep=sleeps)
    assert doc.http_status == 200
    assert sleeps == [1.0, 2.0]
    assert server.hits("/flaky") == 3


def test_5xx_exhausted(server):
    server.routes["/down"] = Reply(500, "x")
    with pytest.raises(RetryableFetchError):
        fetch_article(server.url("/down"), FetchPolicy(attempts=2), sleep=Sleeps())
    assert server.hits("/down") == 2


def test_non_html_rejected(server):
    server.routes["/doc.pdf"] = Reply(200, b"%PDF-1.4", {"Content-Type": "application/pdf"})
    with pytest.raises(UnsupportedContentError):
        fetch_article(server.url("/doc.pdf"), FetchPolicy(), sleep=Sleeps())
    assert server.hits("/doc.pdf") == 1


def test_missing_content_type_accepted(server):
    server.routes["/bare"] = Reply(200, PAGE)
    assert fetch_article(server.url("/bare"), FetchPolicy()).title == "Story"


def test_body_cap(server):
    server.routes["/big"] = Reply.html("<p>" + "x " * 5000 + "</p>")
    doc = fetch_article(server.url("/big"), FetchPolicy(max_body_bytes=1000))
    assert doc.truncated
    assert len(doc.html.encode()) == 1000


def test_charset_from_header(server):
    server.routes["/latin"] = Reply(200, "<p>café</p>".encode("latin-1"), {"Content-Type": "text/html; charset=iso-8859-1"})
    assert fetch_article(server.url("/latin"), FetchPolicy()).text == "café"


def test_network_error_is_retryable():
    with pytest.raises(RetryableFetchError):
        fetch_article("http://127.0.0.1:9/x", FetchPolicy(attempts=1, timeout=2))


class FakeClock:
    def __init__(self):
        self.t = 0.0

    def __call__(self):
        return self.t

    def sleep(self, s):
        self.t += s


def test_host_throttle_spacing():
    clock = FakeClock()
    throttle = HostThrottle(1.0, clock=clock, sleep=clock.sleep)
    starts = []
    for url in ["https://a.org/1", "https://a.org/2", "https://b.org/1", "https://A.org/3"]:
        throttle.run(url, lambda: starts.append((url, clock.t)))
    assert starts == [("https://a.org/1", 0.0), ("https://a.org/2", 1.0), ("https://b.org/1", 1.0), ("https://A.org/3", 2.0)]


def test_backoff_delays():
    b = Backoff(attempts=4, base=1.0, factor=2.0, max_delay=3.0)
    assert [b.delay(k) for k in (1, 2, 3)] == [1.0, 2.0, 3.0]
    assert b.delay(1, hint=2.5) == 2.5


def test_call_with_retry_stops_on_non_retryable():
    calls = []

    def fn():
        calls.append(1)
        raise KeyError("x")

    with pytest.raises(KeyError):
        call_with_retry(fn, Backoff(), lambda e: False, sleep=Sleeps())
    assert len(calls) == 1
