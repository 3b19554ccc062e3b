"""Regenerate the bundled gold sentence lists.

Sentences come from a small slot grammar over three domains (law, medical,
official documents). Every character must be covered by the bundled
lexicon; the script aborts otherwise.

    python tools/make_sentences.py
"""
import random
from pathlib import Path

DATA = Path(__file__).resolve().parents[1] / "src" / "perl_nbest" / "data"

TIME = ["今年", "去年", "目前", "近日", "上午", "下午", "昨天", "本月", "近年来",
        "明天", "当前", "上周", "今天", "年底前", "此前"]
NUM = ["几", "三", "两", "五", "十", "多", "一"]

DOMAINS = {
    "law": {
        "subj": ["法院", "检察院", "律师", "被告人", "原告", "当事人", "公安机关",
                 "法官", "仲裁委员会", "司法机关", "辩护人", "审判庭"],
        "adv": ["依法", "认真", "及时", "已经", "正在", "公开", "严格", "重新"],
        "vp": ["审理了合同纠纷案件", "受理了上诉请求", "提起了行政诉讼", "作出了终审判决",
               "调查了相关证据", "驳回了再审申请", "宣判了这起案件", "送达了法律文书",
               "查封了涉案财产", "冻结了银行账户", "审查了起诉材料", "维护了合法权益",
               "撤销了原判决", "认定了犯罪事实", "支持了诉讼请求", "签订了调解协议"],
        "noun": ["土地", "房产", "案件", "合同", "证据", "罪名", "财产", "债务"],
        "mw": {"土地": "宗", "房产": "套", "案件": "起", "合同": "份", "证据": "项",
               "罪名": "项", "财产": "处", "债务": "笔"},
        "state": ["挂牌", "登记", "公示", "查封", "审理", "拍卖", "立案", "执行"],
    },
    "med": {
        "subj": ["医生", "患者", "医院", "护士", "专家", "病人", "主治医师", "卫生部门",
                 "急诊科", "家属", "医疗队", "药剂师"],
        "adv": ["及时", "仔细", "积极", "已经", "正在", "按时", "反复", "耐心"],
        "vp": ["检查了心脏功能", "开具了处方药物", "完成了手术治疗", "调整了用药剂量",
               "测量了血压体温", "记录了病情变化", "安排了住院观察", "进行了血液化验",
               "控制了感染症状", "缓解了头痛症状", "制定了康复计划", "诊断为慢性胃炎",
               "预防了并发症", "注射了流感疫苗", "观察了呼吸情况", "减轻了关节疼痛"],
        "noun": ["病人", "药物", "床位", "手术", "疫苗", "病例", "医生", "检查"],
        "mw": {"病人": "位", "药物": "种", "床位": "张", "手术": "台", "疫苗": "支",
               "病例": "例", "医生": "名", "检查": "项"},
        "state": ["住院", "确诊", "治愈", "转院", "留观", "复查", "预约", "出院"],
    },
    "odw": {
        "subj": ["政府", "各部门", "有关单位", "市委", "委员会", "工作组", "办公厅",
                 "各级机关", "财政部门", "领导小组", "街道办事处", "人事处"],
        "adv": ["认真", "积极", "全面", "进一步", "切实", "已经", "正在", "统一"],
        "vp": ["落实了工作要求", "印发了实施方案", "召开了专题会议", "部署了重点任务",
               "加强了监督管理", "完善了规章制度", "推进了改革措施", "审议了年度报告",
               "通过了预算草案", "发布了通知公告", "组织了安全检查", "开展了调查研究",
               "提高了服务水平", "优化了审批流程", "批准了建设项目", "征求了群众意见"],
        "noun": ["文件", "项目", "会议", "单位", "方案", "企业", "报告", "意见"],
        "mw": {"文件": "份", "项目": "个", "会议": "次", "单位": "家", "方案": "套",
               "企业": "家", "报告": "篇", "意见": "条"},
        "state": ["批准", "上报", "审批", "通过", "公布", "备案", "签发", "完成"],
    },
}

TOY = {
    "time": ["今年", "去年", "目前", "近日", "上午", "昨天"],
    "subj": ["法院", "医生", "政府", "律师", "专家", "工作组"],
    "adv": ["依法", "认真", "及时", "已经", "正在"],
    "vp": ["审理了案件", "检查了病人", "召开了会议", "发布了通知", "完成了手术",
           "查封了财产", "落实了任务", "调查了证据"],
}


def domain_sentence(rng, dom):
    t = rng.randrange(4)
    if t == 0:
        return rng.choice(TIME) + rng.choice(dom["subj"]) + rng.choice(dom["adv"]) + rng.choice(dom["vp"])
    if t == 1:
        return rng.choice(dom["subj"]) + rng.choice(dom["adv"]) + rng.choice(dom["vp"])
    noun = rng.choice(dom["noun"])
    qty = rng.choice(NUM) + dom["mw"][noun] + noun
    if t == 2:
        return rng.choice(TIME) + rng.choice(dom["state"]) + "的只有" + qty
    return rng.choice(dom["subj"]) + rng.choice(TIME) + rng.choice(dom["state"]) + "了" + qty


def toy_sentence(rng):
    return rng.choice(TOY["time"]) + rng.choice(TOY["subj"]) + rng.choice(TOY["adv"]) + rng.choice(TOY["vp"])


def unique(gen, count, rng, limit=200000):
    seen, out = set(), []
    for _ in range(limit):
        s = gen(rng)
        if s not in seen:
            seen.add(s)
            out.append(s)
            if len(out) == count:
                break
    return out


def main():
    lex = set()
    for line in (DATA / "lexicon.tsv").read_text(encoding="utf-8").splitlines():
        if line and not line.startswith("#"):
            lex.add(line.split("\t")[0])

    rng = random.Random(20251015)
    doms = list(DOMAINS.values())
    gold = unique(lambda r: domain_sentence(r, r.choice(doms)), 12000, rng)
    toy = unique(toy_sentence, 800, rng)

    for name, sents in (("gold_sentences.txt", gold), ("toy_sentences.txt", toy)):
        missing = {c for s in sents for c in s} - lex
        if missing:
            raise SystemExit(f"{name}: characters missing from lexicon: {''.join(sorted(missing))}")
        (DATA / name).write_text("\n".join(sents) + "\n", encoding="utf-8")
        chars = {c for s in sents for c in s}
        mean_len = sum(map(len, sents)) / len(sents)
        print(f"{name}: {len(sents)} sentences, {len(chars)} chars, mean length {mean_len:.2f}")


if __name__ == "__main__":
    main()
